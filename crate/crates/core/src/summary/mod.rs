//! Turns retained chain samples into reported quantities: per-direction
//! means, symmetrized edge strengths, activation probabilities, union
//! credible intervals, recovery metrics, and group-level aggregation.
//!
//! Matrix buffers are p x p row-major; entry (i, j) of a directional
//! quantity describes coordinate j of node i's chain.

pub mod cluster;

use crate::engine::FitResult;
use crate::error::{Error, Result};
use crate::model::ThetaMatrix;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct PosteriorSummary {
    pub p: usize,
    pub level: f64,
    /// Per-direction posterior means.
    pub theta_hat: Vec<f64>,
    /// Symmetrized strengths: average of the two directions.
    pub theta_tilde: Vec<f64>,
    /// Symmetrized activation frequencies; diagonal holds the node's own
    /// activation frequency (1 when the diagonal is pinned).
    pub edge_prob: Vec<f64>,
    /// Union interval bounds, symmetric off the diagonal; the diagonal
    /// carries the node's own directional interval.
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
}

impl PosteriorSummary {
    #[inline]
    pub fn theta_hat(&self, i: usize, j: usize) -> f64 {
        self.theta_hat[i * self.p + j]
    }

    #[inline]
    pub fn theta_tilde(&self, i: usize, j: usize) -> f64 {
        self.theta_tilde[i * self.p + j]
    }

    #[inline]
    pub fn edge_prob(&self, i: usize, j: usize) -> f64 {
        self.edge_prob[i * self.p + j]
    }

    #[inline]
    pub fn ci(&self, i: usize, j: usize) -> (f64, f64) {
        (self.ci_lo[i * self.p + j], self.ci_hi[i * self.p + j])
    }
}

/// Empirical quantile with inclusive linear interpolation between order
/// statistics (h = (n-1)q).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Summarizes a fit at the given credible level.
pub fn summarize(fit: &FitResult, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let p = fit.p;
    if fit.nodes.len() != p {
        return Err(Error::DimensionMismatch {
            context: "fit node count",
            expected: p,
            got: fit.nodes.len(),
        });
    }
    for (r, node) in fit.nodes.iter().enumerate() {
        if node.node != r || node.p != p {
            return Err(Error::DimensionMismatch {
                context: "node sample record",
                expected: r,
                got: node.node,
            });
        }
        if node.retained < 2 {
            return Err(Error::InsufficientSamples {
                need: 2,
                got: node.retained,
            });
        }
    }

    let q_lo = (1.0 - level) / 2.0;
    let q_hi = (1.0 + level) / 2.0;
    let mut hat = vec![0.0; p * p];
    let mut lo_d = vec![0.0; p * p];
    let mut hi_d = vec![0.0; p * p];
    let mut freq = vec![0.0; p * p];
    let mut coord = Vec::new();
    for r in 0..p {
        let node = &fit.nodes[r];
        let inv = 1.0 / node.retained as f64;
        for j in 0..p {
            coord.clear();
            coord.extend(node.theta_coord(j));
            let mean = coord.iter().sum::<f64>() * inv;
            coord.sort_by(|a, b| a.partial_cmp(b).unwrap());
            hat[r * p + j] = mean;
            lo_d[r * p + j] = quantile_sorted(&coord, q_lo);
            hi_d[r * p + j] = quantile_sorted(&coord, q_hi);
            freq[r * p + j] =
                node.delta_coord(j).filter(|&b| b).count() as f64 * inv;
        }
    }

    let mut tilde = vec![0.0; p * p];
    let mut edge = vec![0.0; p * p];
    let mut lo = vec![0.0; p * p];
    let mut hi = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let ij = i * p + j;
            let ji = j * p + i;
            tilde[ij] = (hat[ij] + hat[ji]) / 2.0;
            if i == j {
                edge[ij] = freq[ij];
                lo[ij] = lo_d[ij];
                hi[ij] = hi_d[ij];
            } else {
                edge[ij] = (freq[ij] + freq[ji]) / 2.0;
                lo[ij] = lo_d[ij].min(lo_d[ji]);
                hi[ij] = hi_d[ij].max(hi_d[ji]);
            }
        }
    }

    Ok(PosteriorSummary {
        p,
        level,
        theta_hat: hat,
        theta_tilde: tilde,
        edge_prob: edge,
        ci_lo: lo,
        ci_hi: hi,
    })
}

/// Euclidean-norm ratio |est - truth| / |truth|.
pub fn relative_error(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "relative error operands",
            expected: truth.len(),
            got: est.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in est.iter().zip(truth) {
        num += (e - t) * (e - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::ZeroTruthNorm { node: 0 });
    }
    Ok((num / den).sqrt())
}

/// Per-node error ratios averaged across nodes (row r of each matrix is
/// node r's parameter vector).
pub fn node_averaged_relative_error(est: &ThetaMatrix, truth: &ThetaMatrix) -> Result<f64> {
    if est.p() != truth.p() {
        return Err(Error::DimensionMismatch {
            context: "relative error operands",
            expected: truth.p(),
            got: est.p(),
        });
    }
    let p = est.p();
    let mut total = 0.0;
    for r in 0..p {
        total += relative_error(est.node_row(r), truth.node_row(r))
            .map_err(|_| Error::ZeroTruthNorm { node: r })?;
    }
    Ok(total / p as f64)
}

/// Node-averaged error of each retained iterate against the reference,
/// averaged over the retained range.
pub fn chain_relative_error(fit: &FitResult, truth: &ThetaMatrix) -> Result<f64> {
    let p = fit.p;
    if truth.p() != p {
        return Err(Error::DimensionMismatch {
            context: "reference matrix size",
            expected: p,
            got: truth.p(),
        });
    }
    let retained = fit.retained();
    if retained == 0 {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let mut norms = vec![0.0; p];
    for r in 0..p {
        let n2: f64 = truth.node_row(r).iter().map(|v| v * v).sum();
        if n2 == 0.0 {
            return Err(Error::ZeroTruthNorm { node: r });
        }
        norms[r] = n2.sqrt();
    }
    let mut total = 0.0;
    for t in 0..retained {
        let mut across = 0.0;
        for r in 0..p {
            let row = fit.nodes[r].theta_row(t);
            let mut num = 0.0;
            for (e, v) in row.iter().zip(truth.node_row(r)) {
                num += (e - v) * (e - v);
            }
            across += num.sqrt() / norms[r];
        }
        total += across / p as f64;
    }
    Ok(total / retained as f64)
}

/// Activation pattern of a parameter matrix: true where the entry is
/// nonzero.
pub fn support_of(theta: &ThetaMatrix) -> Vec<bool> {
    theta.values().iter().map(|v| *v != 0.0).collect()
}

/// Edge-selection F1: precision and recall over off-diagonal entries,
/// harmonic mean, with the empty-empty case defined as 0.
pub fn f1_score(pred: &[bool], truth: &[bool], p: usize) -> Result<f64> {
    if pred.len() != p * p || truth.len() != p * p {
        return Err(Error::DimensionMismatch {
            context: "f1 operands",
            expected: p * p,
            got: pred.len().max(truth.len()),
        });
    }
    let mut predicted = 0usize;
    let mut actual = 0usize;
    let mut both = 0usize;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let k = i * p + j;
            if pred[k] {
                predicted += 1;
            }
            if truth[k] {
                actual += 1;
            }
            if pred[k] && truth[k] {
                both += 1;
            }
        }
    }
    let precision = if predicted == 0 {
        0.0
    } else {
        both as f64 / predicted as f64
    };
    let recall = if actual == 0 {
        0.0
    } else {
        both as f64 / actual as f64
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Per-iteration F1 of the retained activation patterns against a reference
/// support, averaged over the retained range.
pub fn chain_f1(fit: &FitResult, truth_support: &[bool]) -> Result<f64> {
    let p = fit.p;
    if truth_support.len() != p * p {
        return Err(Error::DimensionMismatch {
            context: "reference support size",
            expected: p * p,
            got: truth_support.len(),
        });
    }
    let retained = fit.retained();
    if retained == 0 {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let mut actual = 0usize;
    for i in 0..p {
        for j in 0..p {
            if i != j && truth_support[i * p + j] {
                actual += 1;
            }
        }
    }
    let mut total = 0.0;
    for t in 0..retained {
        let mut predicted = 0usize;
        let mut both = 0usize;
        for r in 0..p {
            let bits = fit.nodes[r].delta_row(t);
            for j in 0..p {
                if j == r {
                    continue;
                }
                if bits[j] {
                    predicted += 1;
                    if truth_support[r * p + j] {
                        both += 1;
                    }
                }
            }
        }
        let precision = if predicted == 0 {
            0.0
        } else {
            both as f64 / predicted as f64
        };
        let recall = if actual == 0 {
            0.0
        } else {
            both as f64 / actual as f64
        };
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / retained as f64)
}

/// Interval behavior of a summary against a reference matrix, split by
/// whether the reference entry is active, over unordered off-diagonal pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoverageReport {
    pub active_total: usize,
    pub active_covered: usize,
    pub active_coverage: f64,
    pub inactive_total: usize,
    pub inactive_zero_covered: usize,
    pub inactive_zero_fraction: f64,
    pub inactive_mean_half_width: f64,
}

pub fn coverage_report(summary: &PosteriorSummary, truth: &ThetaMatrix) -> Result<CoverageReport> {
    let p = summary.p;
    if truth.p() != p {
        return Err(Error::DimensionMismatch {
            context: "reference matrix size",
            expected: p,
            got: truth.p(),
        });
    }
    let mut active_total = 0;
    let mut active_covered = 0;
    let mut inactive_total = 0;
    let mut inactive_zero = 0;
    let mut width_sum = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let (lo, hi) = summary.ci(i, j);
            let t = truth.get(i, j);
            if t != 0.0 {
                active_total += 1;
                if lo <= t && t <= hi {
                    active_covered += 1;
                }
            } else {
                inactive_total += 1;
                if lo <= 0.0 && 0.0 <= hi {
                    inactive_zero += 1;
                }
                width_sum += (hi - lo) / 2.0;
            }
        }
    }
    let frac = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(CoverageReport {
        active_total,
        active_covered,
        active_coverage: frac(active_covered, active_total),
        inactive_total,
        inactive_zero_covered: inactive_zero,
        inactive_zero_fraction: frac(inactive_zero, inactive_total),
        inactive_mean_half_width: if inactive_total == 0 {
            0.0
        } else {
            width_sum / inactive_total as f64
        },
    })
}

/// Headline recovery metrics for one fit against a reference.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Metrics {
    pub relative_error: f64,
    pub f1: f64,
    pub coverage: f64,
}

/// Group-averaged edge probabilities. Entry (a, b) averages edge_prob over
/// all unordered cross pairs of groups a and b; the diagonal averages over
/// unordered pairs within the group (0 for singleton groups, which have no
/// pairs).
pub fn phi_matrix(edge_prob: &[f64], p: usize, groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    if edge_prob.len() != p * p {
        return Err(Error::DimensionMismatch {
            context: "edge probability matrix",
            expected: p * p,
            got: edge_prob.len(),
        });
    }
    let mut seen = vec![false; p];
    for (index, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::EmptyGroup { index });
        }
        for &node in group {
            if node >= p || seen[node] {
                return Err(Error::InvalidConfig(format!(
                    "groups must partition the node set; node {node} repeated or out of range"
                )));
            }
            seen[node] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidConfig(
            "groups must cover every node".into(),
        ));
    }

    let k = groups.len();
    let mut phi = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let mut sum = 0.0;
            let mut count = 0usize;
            if a == b {
                let g = &groups[a];
                for x in 0..g.len() {
                    for y in (x + 1)..g.len() {
                        sum += edge_prob[g[x] * p + g[y]];
                        count += 1;
                    }
                }
            } else {
                for &x in &groups[a] {
                    for &y in &groups[b] {
                        sum += edge_prob[x * p + y];
                        count += 1;
                    }
                }
            }
            let value = if count == 0 { 0.0 } else { sum / count as f64 };
            phi[a * k + b] = value;
            phi[b * k + a] = value;
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{McmcConfig, FitResult, NodeSamples, SamplerKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hand-built fit: node r's retained theta rows and delta rows.
    fn fit_from(theta_rows: Vec<Vec<Vec<f64>>>, delta_rows: Vec<Vec<Vec<bool>>>) -> FitResult {
        let p = theta_rows.len();
        let retained = theta_rows[0].len();
        let nodes = theta_rows
            .into_iter()
            .zip(delta_rows)
            .enumerate()
            .map(|(r, (tr, dr))| {
                let theta: Vec<f64> = tr.into_iter().flatten().collect();
                let delta: Vec<bool> = dr.into_iter().flatten().collect();
                NodeSamples::from_parts(r, p, 0, theta, delta).unwrap()
            })
            .collect();
        FitResult {
            p,
            m: 2,
            nodes,
            config: McmcConfig::new(SamplerKind::PgGibbs, retained, 0, 1, 0),
        }
    }

    #[test]
    fn symmetrization_averages_the_two_directions() {
        let fit = fit_from(
            vec![
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
                vec![vec![3.0, 0.0], vec![3.0, 0.0]],
            ],
            vec![
                vec![vec![true, true], vec![true, true]],
                vec![vec![true, true], vec![true, true]],
            ],
        );
        let s = summarize(&fit, 0.95).unwrap();
        assert_eq!(s.theta_hat(0, 1), 1.0);
        assert_eq!(s.theta_hat(1, 0), 3.0);
        assert_eq!(s.theta_tilde(0, 1), 2.0);
        assert_eq!(s.theta_tilde(1, 0), 2.0);
    }

    #[test]
    fn identical_directions_collapse_the_union_interval() {
        let draws = vec![0.1, 0.4, 0.2, 0.3, 0.5];
        let rows: Vec<Vec<f64>> = draws.iter().map(|&v| vec![0.0, v]).collect();
        let rows_t: Vec<Vec<f64>> = draws.iter().map(|&v| vec![v, 0.0]).collect();
        let bits = vec![vec![true, true]; 5];
        let fit = fit_from(vec![rows, rows_t], vec![bits.clone(), bits]);
        let s = summarize(&fit, 0.8).unwrap();
        let (lo, hi) = s.ci(0, 1);
        // Direction 0->1 and 1->0 hold the same draws, so the union equals
        // the directional interval, computed by interpolation on the order
        // statistics: q10 between 0.1 and 0.2, q90 between 0.4 and 0.5.
        assert!((lo - 0.14).abs() < 1e-12, "lo {lo}");
        assert!((hi - 0.46).abs() < 1e-12, "hi {hi}");
    }

    #[test]
    fn opposite_activation_patterns_average_to_half() {
        let fit = fit_from(
            vec![
                vec![vec![0.0, 0.2]; 4],
                vec![vec![0.2, 0.0]; 4],
            ],
            vec![
                vec![vec![true, true]; 4],
                vec![vec![false, false]; 4],
            ],
        );
        let s = summarize(&fit, 0.95).unwrap();
        assert_eq!(s.edge_prob(0, 1), 0.5);
        assert_eq!(s.edge_prob(1, 0), 0.5);
        assert_eq!(s.edge_prob(0, 0), 1.0);
        assert_eq!(s.edge_prob(1, 1), 0.0);
    }

    #[test]
    fn summary_outputs_are_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = 5;
        let retained = 30;
        let theta: Vec<Vec<Vec<f64>>> = (0..p)
            .map(|_| {
                (0..retained)
                    .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let delta: Vec<Vec<Vec<bool>>> = (0..p)
            .map(|_| {
                (0..retained)
                    .map(|_| (0..p).map(|_| rng.gen_bool(0.4)).collect())
                    .collect()
            })
            .collect();
        let fit = fit_from(theta, delta);
        let s = summarize(&fit, 0.9).unwrap();
        for i in 0..p {
            for j in 0..p {
                assert_eq!(s.theta_tilde(i, j), s.theta_tilde(j, i));
                assert_eq!(s.edge_prob(i, j), s.edge_prob(j, i));
                if i != j {
                    // Union interval contains both directional intervals by
                    // construction; check symmetry of the stored bounds.
                    assert_eq!(s.ci(i, j), s.ci(j, i));
                    let (lo, hi) = s.ci(i, j);
                    assert!(lo <= hi);
                }
            }
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let fit = fit_from(
            vec![vec![vec![0.0, 0.1]], vec![vec![0.1, 0.0]]],
            vec![vec![vec![true, true]], vec![vec![true, true]]],
        );
        assert!(matches!(
            summarize(&fit, 0.95),
            Err(Error::InsufficientSamples { .. })
        ));
        let ok = fit_from(
            vec![vec![vec![0.0, 0.1]; 2], vec![vec![0.1, 0.0]; 2]],
            vec![vec![vec![true, true]; 2], vec![vec![true, true]; 2]],
        );
        assert!(summarize(&ok, 1.2).is_err());
        assert!(summarize(&ok, 0.95).is_ok());
    }

    #[test]
    fn relative_error_basics() {
        let truth = vec![1.0, -2.0, 3.0];
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        assert_eq!(relative_error(&[0.0, 0.0, 0.0], &truth).unwrap(), 1.0);
        let doubled: Vec<f64> = truth.iter().map(|v| 2.0 * v).collect();
        assert!((relative_error(&doubled, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            relative_error(&truth, &[0.0, 0.0, 0.0]),
            Err(Error::ZeroTruthNorm { .. })
        ));
    }

    #[test]
    fn relative_error_is_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let est: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let truth: Vec<f64> = (0..8).map(|_| rng.gen_range(0.5..2.0)).collect();
        let base = relative_error(&est, &truth).unwrap();
        for a in [0.5, -3.0, 7.2] {
            let se: Vec<f64> = est.iter().map(|v| a * v).collect();
            let st: Vec<f64> = truth.iter().map(|v| a * v).collect();
            assert!((relative_error(&se, &st).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_basics() {
        let p = 4;
        let mut truth = vec![false; p * p];
        // Edges (0,1), (2,3) in both directions plus (0,2) one direction:
        // five true off-diagonal entries.
        for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            truth[i * p + j] = true;
        }
        truth[2] = true;
        assert_eq!(f1_score(&truth, &truth, p).unwrap(), 1.0);
        let none = vec![false; p * p];
        assert_eq!(f1_score(&none, &truth, p).unwrap(), 0.0);
        assert_eq!(f1_score(&none, &none, p).unwrap(), 0.0);

        // Four of the five found plus one false positive.
        let mut pred = truth.clone();
        pred[2] = false;
        pred[3 * p + 1] = true;
        let f1 = f1_score(&pred, &truth, p).unwrap();
        assert!((f1 - 0.8).abs() < 1e-15, "f1 {f1}");
    }

    #[test]
    fn f1_invariant_under_relabeling() {
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pred: Vec<bool> = (0..p * p).map(|_| rng.gen_bool(0.3)).collect();
        let truth: Vec<bool> = (0..p * p).map(|_| rng.gen_bool(0.3)).collect();
        let base = f1_score(&pred, &truth, p).unwrap();
        let perm = [3usize, 0, 4, 1, 2];
        let apply = |m: &[bool]| -> Vec<bool> {
            let mut out = vec![false; p * p];
            for i in 0..p {
                for j in 0..p {
                    out[perm[i] * p + perm[j]] = m[i * p + j];
                }
            }
            out
        };
        let f1 = f1_score(&apply(&pred), &apply(&truth), p).unwrap();
        assert!((f1 - base).abs() < 1e-15);
    }

    #[test]
    fn coverage_extremes() {
        let p = 3;
        let mut truth = ThetaMatrix::zeros(p);
        truth.set(0, 1, 2.0);
        truth.set(1, 0, 2.0);
        let wide = PosteriorSummary {
            p,
            level: 0.95,
            theta_hat: vec![0.0; p * p],
            theta_tilde: vec![0.0; p * p],
            edge_prob: vec![0.0; p * p],
            ci_lo: vec![-1e12; p * p],
            ci_hi: vec![1e12; p * p],
        };
        let report = coverage_report(&wide, &truth).unwrap();
        assert_eq!(report.active_coverage, 1.0);
        assert_eq!(report.inactive_zero_fraction, 1.0);

        let narrow = PosteriorSummary {
            ci_lo: vec![5.0; p * p],
            ci_hi: vec![5.0; p * p],
            ..wide
        };
        let report = coverage_report(&narrow, &truth).unwrap();
        assert_eq!(report.active_coverage, 0.0);
        assert_eq!(report.inactive_zero_fraction, 0.0);
        assert_eq!(report.inactive_mean_half_width, 0.0);
    }

    #[test]
    fn phi_constant_matrix_and_singletons() {
        let p = 4;
        let c = 0.3;
        let mut edge = vec![c; p * p];
        for i in 0..p {
            edge[i * p + i] = 1.0;
        }
        let groups = vec![vec![0, 1], vec![2, 3]];
        let phi = phi_matrix(&edge, p, &groups).unwrap();
        for v in &phi {
            assert!((v - c).abs() < 1e-15);
        }

        let singles = vec![vec![2], vec![0], vec![1], vec![3]];
        let phi = phi_matrix(&edge, p, &singles).unwrap();
        assert_eq!(phi[0 * 4 + 1], edge[2 * p]);
        // Singleton diagonals have no pairs.
        assert_eq!(phi[0], 0.0);
    }

    #[test]
    fn phi_matches_direct_enumeration() {
        let p = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut edge = vec![0.0; p * p];
        for i in 0..p {
            for j in (i + 1)..p {
                let v = rng.gen_range(0.0..1.0);
                edge[i * p + j] = v;
                edge[j * p + i] = v;
            }
        }
        let groups = vec![vec![0, 3], vec![1, 2, 5], vec![4]];
        let phi = phi_matrix(&edge, p, &groups).unwrap();
        // Brute force over explicit pair lists.
        let pairs_01 = [(0, 1), (0, 2), (0, 5), (3, 1), (3, 2), (3, 5)];
        let want: f64 =
            pairs_01.iter().map(|&(a, b)| edge[a * p + b]).sum::<f64>() / 6.0;
        assert!((phi[1] - want).abs() < 1e-12);
        let within_1 = [(1, 2), (1, 5), (2, 5)];
        let want: f64 =
            within_1.iter().map(|&(a, b)| edge[a * p + b]).sum::<f64>() / 3.0;
        assert!((phi[1 * 3 + 1] - want).abs() < 1e-12);
        // Symmetry of the output.
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(phi[a * 3 + b], phi[b * 3 + a]);
            }
        }
    }

    #[test]
    fn phi_rejects_bad_partitions() {
        let p = 3;
        let edge = vec![0.5; p * p];
        assert!(matches!(
            phi_matrix(&edge, p, &[vec![0, 1, 2], vec![]]).unwrap_err(),
            Error::EmptyGroup { index: 1 }
        ));
        assert!(phi_matrix(&edge, p, &[vec![0, 1]]).is_err());
        assert!(phi_matrix(&edge, p, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn chain_metrics_on_a_hand_built_fit() {
        // Two iterations: the first perfect, the second all zero thetas with
        // an empty pattern, against truth with unit rows.
        let truth_rows = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let truth = ThetaMatrix::from_rows(2, truth_rows.concat()).unwrap();
        let fit = fit_from(
            vec![
                vec![vec![1.0, 1.0], vec![0.0, 0.0]],
                vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            ],
            vec![
                vec![vec![true, true], vec![false, false]],
                vec![vec![true, true], vec![false, false]],
            ],
        );
        let err = chain_relative_error(&fit, &truth).unwrap();
        // First iterate errors 0, second 1; averaged 0.5.
        assert!((err - 0.5).abs() < 1e-12);
        let f1 = chain_f1(&fit, &support_of(&truth)).unwrap();
        // First iterate F1 = 1, second = 0 (nothing predicted).
        assert!((f1 - 0.5).abs() < 1e-12);
    }
}
