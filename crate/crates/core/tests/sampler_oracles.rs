//! Distributional checks of the two MCMC kernels against quadrature
//! oracles that never touch the samplers.
//!
//! The target density over (theta_r, delta_r) factorizes so that inactive
//! coordinates integrate out in closed form; what remains is a one or two
//! dimensional integral per selection pattern, which trapezoid quadrature
//! handles to far better accuracy than the Monte Carlo tolerances used
//! here.

use pottsfit_core::engine::{run_node, McmcConfig, SamplerKind};
use pottsfit_core::model::{gibbs_generate, DataMatrix, PottsSpec, ThetaMatrix};
use pottsfit_core::model::conditional_log_likelihood;
use pottsfit_core::prior::Hyperparams;

const GRID: usize = 481;
const LIM: f64 = 9.0;

/// Unnormalized log target for node 0 at a full theta vector with the given
/// selection pattern, written from the definitions: sparsified conditional
/// log-likelihood, slab and spike quadratics, selection log-odds.
fn log_target(
    theta: &[f64],
    active: &[bool],
    data: &DataMatrix,
    spec: &PottsSpec,
    hp: &Hyperparams,
) -> f64 {
    let sparsified: Vec<f64> = theta
        .iter()
        .zip(active)
        .map(|(&v, &a)| if a { v } else { 0.0 })
        .collect();
    let ll = conditional_log_likelihood(0, &sparsified, data, spec).unwrap();
    let mut quad = 0.0;
    let mut k = 0usize;
    for (&v, &a) in theta.iter().zip(active) {
        let var = if a { hp.rho } else { hp.gamma };
        quad += v * v / (2.0 * var);
        k += a as usize;
    }
    let slo = (hp.q / (1.0 - hp.q)).ln() + 0.5 * (hp.gamma / hp.rho).ln();
    ll - quad + k as f64 * slo
}

/// Posterior over (theta_00, theta_01, delta_01) for a p=2 problem with the
/// diagonal selection pinned active, by 2d quadrature. Inactive theta_01
/// integrates to a Gaussian constant and contributes zero to its mean.
/// Returns (E[theta_00], E[theta_01], P[delta_01 = 1]).
struct QuadOracle {
    mean_diag: f64,
    mean_edge: f64,
    edge_inclusion: f64,
}

fn quadrature_p2(data: &DataMatrix, spec: &PottsSpec, hp: &Hyperparams) -> QuadOracle {
    let step = 2.0 * LIM / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| -LIM + step * i as f64).collect();

    // delta = (1, 1): joint 2d integral.
    let mut w11 = vec![0.0; GRID * GRID];
    let mut max11 = f64::NEG_INFINITY;
    for (a, &x) in grid.iter().enumerate() {
        for (b, &y) in grid.iter().enumerate() {
            let v = log_target(&[x, y], &[true, true], data, spec, hp);
            w11[a * GRID + b] = v;
            max11 = max11.max(v);
        }
    }
    // delta = (1, 0): theta_01 marginalizes to sqrt(2 pi gamma).
    let mut w10 = vec![0.0; GRID];
    let mut max10 = f64::NEG_INFINITY;
    for (a, &x) in grid.iter().enumerate() {
        let v = log_target(&[x, 0.0], &[true, false], data, spec, hp)
            + 0.5 * (2.0 * std::f64::consts::PI * hp.gamma).ln();
        w10[a] = v;
        max10 = max10.max(v);
    }

    let shift = max11.max(max10);
    let mut z11 = 0.0;
    let mut ex = 0.0;
    let mut ey = 0.0;
    for (a, &x) in grid.iter().enumerate() {
        for (b, &y) in grid.iter().enumerate() {
            let w = (w11[a * GRID + b] - shift).exp();
            z11 += w;
            ex += w * x;
            ey += w * y;
        }
    }
    z11 *= step * step;
    ex *= step * step;
    ey *= step * step;
    let mut z10 = 0.0;
    let mut ex10 = 0.0;
    for (a, &x) in grid.iter().enumerate() {
        let w = (w10[a] - shift).exp();
        z10 += w;
        ex10 += w * x;
    }
    z10 *= step;
    ex10 *= step;

    let z = z11 + z10;
    QuadOracle {
        mean_diag: (ex + ex10) / z,
        mean_edge: ey / z,
        edge_inclusion: z11 / z,
    }
}

struct P2Fixture {
    spec: PottsSpec,
    data: DataMatrix,
    hp: Hyperparams,
    oracle: QuadOracle,
}

fn p2_fixture() -> P2Fixture {
    let spec = PottsSpec::ising_identity(2, 2).unwrap();
    let truth = ThetaMatrix::from_rows(2, vec![-1.0, 1.2, 1.2, -1.0]).unwrap();
    let data = gibbs_generate(&truth, &spec, 50, 1000, 10, 19).unwrap();
    // A weak edge and a mild spike keep the selection indicator toggling
    // every few sweeps in both kernels, so the inclusion probability is a
    // real test rather than a saturated one.
    let hp = Hyperparams::from_defaults(50, 2)
        .unwrap()
        .with_q(0.25)
        .unwrap()
        .with_gamma(0.2)
        .unwrap()
        .with_sigma(0.5)
        .unwrap()
        .with_fix_diagonal_active(true);
    let oracle = quadrature_p2(&data, &spec, &hp);
    P2Fixture {
        spec,
        data,
        hp,
        oracle,
    }
}

fn chain_stats(fx: &P2Fixture, sampler: SamplerKind, seed: u64) -> (f64, f64, f64) {
    let cfg = McmcConfig::new(sampler, 80_000, 8_000, 1, seed);
    let out = run_node(0, &fx.data, &fx.hp, &fx.spec, &cfg, seed).unwrap();
    let n = out.retained as f64;
    let mean_diag = out.theta_coord(0).sum::<f64>() / n;
    let mean_edge = out.theta_coord(1).sum::<f64>() / n;
    let incl = out.delta_coord(1).filter(|&b| b).count() as f64 / n;
    (mean_diag, mean_edge, incl)
}

#[test]
fn both_kernels_match_the_quadrature_posterior() {
    let fx = p2_fixture();
    for (sampler, seed) in [(SamplerKind::Mala, 11u64), (SamplerKind::PgGibbs, 22u64)] {
        let (mean_diag, mean_edge, incl) = chain_stats(&fx, sampler, seed);
        assert!(
            (mean_diag - fx.oracle.mean_diag).abs() < 0.05,
            "{sampler:?} diagonal mean {mean_diag:.4} vs quadrature {:.4}",
            fx.oracle.mean_diag
        );
        assert!(
            (mean_edge - fx.oracle.mean_edge).abs() < 0.05,
            "{sampler:?} edge mean {mean_edge:.4} vs quadrature {:.4}",
            fx.oracle.mean_edge
        );
        assert!(
            (incl - fx.oracle.edge_inclusion).abs() < 0.02,
            "{sampler:?} inclusion {incl:.4} vs quadrature {:.4}",
            fx.oracle.edge_inclusion
        );
    }
}

#[test]
fn kernels_agree_with_each_other_on_p2() {
    let fx = p2_fixture();
    let (d_m, e_m, i_m) = chain_stats(&fx, SamplerKind::Mala, 33);
    let (d_p, e_p, i_p) = chain_stats(&fx, SamplerKind::PgGibbs, 44);
    assert!((e_m - e_p).abs() < 0.05, "edge means {e_m:.4} vs {e_p:.4}");
    assert!((d_m - d_p).abs() < 0.05, "diag means {d_m:.4} vs {d_p:.4}");
    assert!((i_m - i_p).abs() < 0.02, "inclusions {i_m:.4} vs {i_p:.4}");
}

#[test]
fn chain_quantiles_match_quadrature_on_the_always_active_coordinate() {
    let fx = p2_fixture();
    // Marginal CDF of theta_00 by quadrature over both selection patterns.
    let step = 2.0 * LIM / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| -LIM + step * i as f64).collect();
    let mut density = vec![0.0; GRID];
    let mut max = f64::NEG_INFINITY;
    let mut logs = vec![vec![0.0; GRID]; 2];
    for (a, &x) in grid.iter().enumerate() {
        let mut row = vec![f64::NEG_INFINITY; GRID];
        for (b, &y) in grid.iter().enumerate() {
            row[b] = log_target(&[x, y], &[true, true], &fx.data, &fx.spec, &fx.hp);
        }
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum::<f64>() * step;
        logs[0][a] = m + s.ln();
        logs[1][a] = log_target(&[x, 0.0], &[true, false], &fx.data, &fx.spec, &fx.hp)
            + 0.5 * (2.0 * std::f64::consts::PI * fx.hp.gamma).ln();
        max = max.max(logs[0][a]).max(logs[1][a]);
    }
    for a in 0..GRID {
        density[a] = (logs[0][a] - max).exp() + (logs[1][a] - max).exp();
    }
    let total: f64 = density.iter().sum();
    let quantile = |q: f64| {
        let mut acc = 0.0;
        for (a, d) in density.iter().enumerate() {
            let w = d / total;
            if acc + w >= q {
                if a == 0 {
                    return grid[0];
                }
                return grid[a - 1] + step * (q - acc) / w;
            }
            acc += w;
        }
        grid[GRID - 1]
    };

    let cfg = McmcConfig::new(SamplerKind::Mala, 40_000, 4_000, 1, 55);
    let out = run_node(0, &fx.data, &fx.hp, &fx.spec, &cfg, 55).unwrap();
    let mut draws: Vec<f64> = out.theta_coord(0).collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let chain = draws[((draws.len() - 1) as f64 * q).round() as usize];
        let exact = quantile(q);
        assert!(
            (chain - exact).abs() < 0.05,
            "quantile {q}: chain {chain:.4} vs quadrature {exact:.4}"
        );
    }
}

#[test]
fn delta_marginals_agree_across_kernels_on_p3() {
    let p = 3;
    let spec = PottsSpec::ising_identity(p, 2).unwrap();
    let truth = ThetaMatrix::from_rows(
        p,
        vec![
            -1.0, 0.8, 0.0, //
            0.8, -1.0, 0.0, //
            0.0, 0.0, -1.0,
        ],
    )
    .unwrap();
    let data = gibbs_generate(&truth, &spec, 40, 1000, 10, 616).unwrap();
    let hp = Hyperparams::from_defaults(40, p)
        .unwrap()
        .with_q(0.3)
        .unwrap()
        .with_gamma(0.3)
        .unwrap()
        .with_sigma(0.6)
        .unwrap()
        .with_fix_diagonal_active(true);
    let iters = 100_000;
    let mut freqs = Vec::new();
    for (sampler, seed) in [(SamplerKind::Mala, 5u64), (SamplerKind::PgGibbs, 6u64)] {
        let cfg = McmcConfig::new(sampler, iters, 10_000, 1, seed);
        let out = run_node(0, &data, &hp, &spec, &cfg, seed).unwrap();
        let n = out.retained as f64;
        let f: Vec<f64> = (0..p)
            .map(|j| out.delta_coord(j).filter(|&b| b).count() as f64 / n)
            .collect();
        freqs.push(f);
    }
    for j in 0..p {
        assert!(
            (freqs[0][j] - freqs[1][j]).abs() < 0.02,
            "coordinate {j}: {:.4} vs {:.4}",
            freqs[0][j],
            freqs[1][j]
        );
    }
}


/// Diagnostic, not an assertion: prints chain-vs-quadrature deviations for
/// both kernels so tolerance headroom can be inspected when retuning.
#[test]
#[ignore]
fn print_oracle_deviations() {
    let fx = p2_fixture();
    println!(
        "quadrature: diag {:.4} edge {:.4} incl {:.4}",
        fx.oracle.mean_diag, fx.oracle.mean_edge, fx.oracle.edge_inclusion
    );
    for (sampler, seed) in [
        (SamplerKind::Mala, 11u64),
        (SamplerKind::PgGibbs, 22),
        (SamplerKind::Mala, 33),
        (SamplerKind::PgGibbs, 44),
    ] {
        let (d, e, i) = chain_stats(&fx, sampler, seed);
        println!(
            "{sampler:?} seed {seed}: diag {:+.4} edge {:+.4} incl {:+.4}",
            d - fx.oracle.mean_diag,
            e - fx.oracle.mean_edge,
            i - fx.oracle.edge_inclusion
        );
    }
}
