//! Node-conditional likelihood, its gradient, and the pseudo-log-likelihood.
//!
//! For node r and observation row z, the conditional probability of color s is
//!
//!   P(s | z, theta_r) = exp(E(s)) / sum_t exp(E(t)),
//!   E(s) = theta_rr C(s) + sum_{j != r} theta_rj C(s, z_j),
//!
//! and the conditional log-likelihood over the data set sums
//! E(z_r) - log sum_t exp(E(t)) across rows. All normalizers go through
//! log-sum-exp so large exponents (|theta| up to the clamp bound) stay finite.

use super::{DataMatrix, PottsSpec, ThetaMatrix};
use crate::error::{Error, Result};

/// Numerically stable log of sum of exponentials.
#[inline]
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

fn check_node_inputs(r: usize, theta_r: &[f64], data: &DataMatrix, spec: &PottsSpec) -> Result<()> {
    if r >= spec.p() {
        return Err(Error::NodeOutOfRange { node: r, p: spec.p() });
    }
    if theta_r.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "theta_r length",
            expected: spec.p(),
            got: theta_r.len(),
        });
    }
    if data.p() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "data column count",
            expected: spec.p(),
            got: data.p(),
        });
    }
    Ok(())
}

/// Per-color exponents E(s) for one observation row, restricted to the given
/// support of theta_r. `out` has length m. Contributions are accumulated in
/// ascending support order, so a full support reproduces the dense evaluation
/// bit for bit.
#[inline]
fn color_exponents(
    r: usize,
    theta_r: &[f64],
    support: &[usize],
    row: &[u8],
    spec: &PottsSpec,
    out: &mut [f64],
) {
    out.fill(0.0);
    let m = spec.m();
    for &j in support {
        let w = theta_r[j];
        if w == 0.0 {
            continue;
        }
        if j == r {
            for s in 0..m {
                out[s] += w * spec.node_stat(s as u8);
            }
        } else {
            let t = row[j];
            for s in 0..m {
                out[s] += w * spec.pair_stat(s as u8, t);
            }
        }
    }
}

/// Conditional color distribution of node r given the rest of one row.
/// Returns the m probabilities; they sum to one up to rounding.
pub fn conditional_distribution(
    r: usize,
    theta_r: &[f64],
    row: &[u8],
    spec: &PottsSpec,
) -> Result<Vec<f64>> {
    if r >= spec.p() {
        return Err(Error::NodeOutOfRange { node: r, p: spec.p() });
    }
    if theta_r.len() != spec.p() || row.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "conditional distribution inputs",
            expected: spec.p(),
            got: theta_r.len().min(row.len()),
        });
    }
    let support: Vec<usize> = (0..spec.p()).collect();
    let mut exps = vec![0.0; spec.m()];
    color_exponents(r, theta_r, &support, row, spec, &mut exps);
    let lse = log_sum_exp(&exps);
    Ok(exps.iter().map(|&e| (e - lse).exp()).collect())
}

/// Conditional log-likelihood of node r under theta_r, restricted to the
/// listed support coordinates. Coordinates outside the support do not
/// contribute, which is exactly evaluation at the sparsified vector.
pub(crate) fn conditional_ll_masked(
    r: usize,
    theta_r: &[f64],
    support: &[usize],
    data: &DataMatrix,
    spec: &PottsSpec,
) -> f64 {
    let m = spec.m();
    let mut exps = vec![0.0; m];
    let mut total = 0.0;
    for row in data.rows() {
        color_exponents(r, theta_r, support, row, spec, &mut exps);
        total += exps[row[r] as usize] - log_sum_exp(&exps);
    }
    total
}

/// Gradient of the masked conditional log-likelihood, written only at the
/// support coordinates of `out` (all other entries are left untouched).
pub(crate) fn gradient_masked(
    r: usize,
    theta_r: &[f64],
    support: &[usize],
    data: &DataMatrix,
    spec: &PottsSpec,
    out: &mut [f64],
) {
    let m = spec.m();
    let mut exps = vec![0.0; m];
    let mut probs = vec![0.0; m];
    for &j in support {
        out[j] = 0.0;
    }
    for row in data.rows() {
        color_exponents(r, theta_r, support, row, spec, &mut exps);
        let lse = log_sum_exp(&exps);
        for s in 0..m {
            probs[s] = (exps[s] - lse).exp();
        }
        let zr = row[r];
        for &j in support {
            if j == r {
                let mut expect = 0.0;
                for s in 0..m {
                    expect += probs[s] * spec.node_stat(s as u8);
                }
                out[j] += spec.node_stat(zr) - expect;
            } else {
                let t = row[j];
                let mut expect = 0.0;
                for s in 0..m {
                    expect += probs[s] * spec.pair_stat(s as u8, t);
                }
                out[j] += spec.pair_stat(zr, t) - expect;
            }
        }
    }
}

/// Conditional log-likelihood of node r at the full vector theta_r.
/// Zero rows of data give exactly zero.
pub fn conditional_log_likelihood(
    r: usize,
    theta_r: &[f64],
    data: &DataMatrix,
    spec: &PottsSpec,
) -> Result<f64> {
    check_node_inputs(r, theta_r, data, spec)?;
    let support: Vec<usize> = (0..spec.p()).collect();
    Ok(conditional_ll_masked(r, theta_r, &support, data, spec))
}

/// Gradient of the conditional log-likelihood with respect to theta_r.
/// Component j is the observed-minus-expected statistic summed over rows;
/// component r uses the per-node statistic C(s) in place of the pair one.
pub fn conditional_log_lik_gradient(
    r: usize,
    theta_r: &[f64],
    data: &DataMatrix,
    spec: &PottsSpec,
) -> Result<Vec<f64>> {
    check_node_inputs(r, theta_r, data, spec)?;
    let support: Vec<usize> = (0..spec.p()).collect();
    let mut out = vec![0.0; spec.p()];
    gradient_masked(r, theta_r, &support, data, spec, &mut out);
    Ok(out)
}

/// Pseudo-log-likelihood: the sum of all node-conditional log-likelihoods,
/// node r evaluated at row r of theta. Summation order is fixed (ascending r).
pub fn pseudo_log_likelihood(
    theta: &ThetaMatrix,
    data: &DataMatrix,
    spec: &PottsSpec,
) -> Result<f64> {
    if theta.p() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "theta matrix size",
            expected: spec.p(),
            got: theta.p(),
        });
    }
    let mut total = 0.0;
    for r in 0..spec.p() {
        total += conditional_log_likelihood(r, theta.node_row(r), data, spec)?;
    }
    Ok(total)
}
