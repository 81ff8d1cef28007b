//! Synthetic data by single-site Gibbs sampling from the node conditionals.

use super::{DataMatrix, PottsSpec, ThetaMatrix};
use crate::error::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Draws n rows from the joint model by systematic-scan Gibbs sampling:
/// one sweep updates every node in ascending order from its conditional.
/// `burn_in` sweeps are discarded, then every `thin`-th sweep is recorded
/// until n rows exist. The initial state is uniform on colors. Fully
/// deterministic given the seed.
pub fn gibbs_generate(
    theta: &ThetaMatrix,
    spec: &PottsSpec,
    n: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<DataMatrix> {
    let p = spec.p();
    let m = spec.m();
    if theta.p() != p {
        return Err(Error::DimensionMismatch {
            context: "theta matrix size",
            expected: p,
            got: theta.p(),
        });
    }
    if thin == 0 {
        return Err(Error::InvalidConfig("thin must be >= 1".into()));
    }
    theta.require_symmetric()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: Vec<u8> = (0..p).map(|_| rng.gen_range(0..m as u8)).collect();
    let mut exps = vec![0.0; m];
    let mut values = Vec::with_capacity(n * p);

    let sweep = |state: &mut Vec<u8>, rng: &mut ChaCha8Rng, exps: &mut Vec<f64>| {
        for r in 0..p {
            let row = theta.node_row(r);
            for s in 0..m {
                let mut e = row[r] * spec.node_stat(s as u8);
                for j in 0..p {
                    if j != r && row[j] != 0.0 {
                        e += row[j] * spec.pair_stat(s as u8, state[j]);
                    }
                }
                exps[s] = e;
            }
            let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for e in exps.iter_mut() {
                *e = (*e - max).exp();
                total += *e;
            }
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut color = m - 1;
            for (s, &w) in exps.iter().enumerate() {
                acc += w;
                if u < acc {
                    color = s;
                    break;
                }
            }
            state[r] = color as u8;
        }
    };

    for _ in 0..burn_in {
        sweep(&mut state, &mut rng, &mut exps);
    }
    for _ in 0..n {
        for _ in 0..thin {
            sweep(&mut state, &mut rng, &mut exps);
        }
        values.extend_from_slice(&state);
    }
    DataMatrix::new(n, p, values, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::exact_log_pmf;

    #[test]
    fn deterministic_given_seed() {
        let spec = PottsSpec::ising_identity(4, 2).unwrap();
        let mut theta = ThetaMatrix::zeros(4);
        for i in 0..4 {
            theta.set(i, i, -0.5);
        }
        theta.set(0, 1, 1.0);
        theta.set(1, 0, 1.0);
        let a = gibbs_generate(&theta, &spec, 50, 100, 2, 99).unwrap();
        let b = gibbs_generate(&theta, &spec, 50, 100, 2, 99).unwrap();
        assert_eq!(a, b);
        let c = gibbs_generate(&theta, &spec, 50, 100, 2, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_interaction_is_uniform() {
        let spec = PottsSpec::ising_identity(3, 3).unwrap();
        let theta = ThetaMatrix::zeros(3);
        let data = gibbs_generate(&theta, &spec, 3000, 10, 1, 2).unwrap();
        for col in 0..3 {
            for color in 0..3u8 {
                let freq = (0..data.n())
                    .filter(|&i| data.get(i, col) == color)
                    .count() as f64
                    / data.n() as f64;
                assert!(
                    (freq - 1.0 / 3.0).abs() < 0.03,
                    "col {col} color {color}: {freq}"
                );
            }
        }
    }

    #[test]
    fn single_node_matches_exact_distribution() {
        // With p = 1 the conditional is the joint, so frequencies must track
        // the exact pmf.
        let spec = PottsSpec::scaled_quadratic(1, 3).unwrap();
        let mut theta = ThetaMatrix::zeros(1);
        theta.set(0, 0, 2.0);
        let data = gibbs_generate(&theta, &spec, 20000, 0, 1, 31).unwrap();
        for color in 0..3u8 {
            let freq = (0..data.n())
                .filter(|&i| data.get(i, 0) == color)
                .count() as f64
                / data.n() as f64;
            let exact = exact_log_pmf(&[color], &theta, &spec).unwrap().exp();
            assert!((freq - exact).abs() < 0.015, "color {color}: {freq} vs {exact}");
        }
    }

    #[test]
    fn pair_frequencies_track_exact_pmf() {
        let spec = PottsSpec::ising_identity(2, 2).unwrap();
        let mut theta = ThetaMatrix::zeros(2);
        theta.set(0, 0, -1.0);
        theta.set(1, 1, 0.5);
        theta.set(0, 1, 1.5);
        theta.set(1, 0, 1.5);
        let data = gibbs_generate(&theta, &spec, 20000, 500, 2, 77).unwrap();
        let mut tv = 0.0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                let freq = (0..data.n())
                    .filter(|&i| data.get(i, 0) == a && data.get(i, 1) == b)
                    .count() as f64
                    / data.n() as f64;
                let exact = exact_log_pmf(&[a, b], &theta, &spec).unwrap().exp();
                tv += (freq - exact).abs();
            }
        }
        assert!(tv / 2.0 < 0.02, "tv {}", tv / 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = PottsSpec::ising_identity(2, 2).unwrap();
        let mut asym = ThetaMatrix::zeros(2);
        asym.set(0, 1, 1.0);
        assert!(gibbs_generate(&asym, &spec, 5, 0, 1, 1).is_err());
        let theta = ThetaMatrix::zeros(2);
        assert!(gibbs_generate(&theta, &spec, 5, 0, 0, 1).is_err());
        let empty = gibbs_generate(&theta, &spec, 0, 0, 1, 1).unwrap();
        assert_eq!(empty.n(), 0);
    }
}
