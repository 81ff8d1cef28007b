//! Agglomerative hierarchical clustering with Ward linkage.
//!
//! Works directly on a dissimilarity matrix in the squared-update
//! convention: the Lance-Williams recurrence runs on squared
//! dissimilarities and merge heights are reported as square roots, which is
//! the behavior of the common "ward.D2" implementations. Cluster ids follow
//! the usual convention: leaves are 0..k-1 and merge number s creates
//! cluster k+s.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    /// Lower cluster id of the pair.
    pub a: usize,
    /// Higher cluster id of the pair.
    pub b: usize,
    pub height: f64,
    /// Leaves under the merged cluster.
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct ClusterTree {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

fn validate_dissimilarity(d: &[f64], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "clustering needs at least 2 items, got {k}"
        )));
    }
    if d.len() != k * k {
        return Err(Error::DimensionMismatch {
            context: "dissimilarity matrix",
            expected: k * k,
            got: d.len(),
        });
    }
    for i in 0..k {
        if d[i * k + i] != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dissimilarity diagonal must be zero, got {} at {i}",
                d[i * k + i]
            )));
        }
        for j in 0..k {
            let v = d[i * k + j];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    context: "dissimilarity matrix",
                });
            }
            let w = d[j * k + i];
            if (v - w).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "dissimilarity not symmetric at ({i}, {j}): {v} vs {w}"
                )));
            }
        }
    }
    Ok(())
}

/// Ward clustering of a symmetric nonnegative dissimilarity matrix with a
/// zero diagonal. Ties break toward the lowest (then second-lowest) cluster
/// id of the candidate pair.
pub fn ward_cluster(dissim: &[f64], k: usize) -> Result<ClusterTree> {
    validate_dissimilarity(dissim, k)?;
    let mut d2: Vec<f64> = dissim.iter().map(|v| v * v).collect();
    let mut size = vec![1usize; k];
    let mut id: Vec<usize> = (0..k).collect();
    let mut alive = vec![true; k];
    let mut merges = Vec::with_capacity(k - 1);

    for step in 0..k - 1 {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        let mut slots = (0, 0);
        for i in 0..k {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..k {
                if !alive[j] {
                    continue;
                }
                let cand = (d2[i * k + j], id[i].min(id[j]), id[i].max(id[j]));
                if cand < best {
                    best = cand;
                    slots = (i, j);
                }
            }
        }
        let (si, sj) = slots;
        let merged_d2 = best.0;
        let (na, nb) = (size[si], size[sj]);
        for t in 0..k {
            if t == si || t == sj || !alive[t] {
                continue;
            }
            let nt = size[t];
            let dat = d2[si * k + t];
            let dbt = d2[sj * k + t];
            let v = ((na + nt) as f64 * dat + (nb + nt) as f64 * dbt
                - nt as f64 * merged_d2)
                / (na + nb + nt) as f64;
            d2[si * k + t] = v;
            d2[t * k + si] = v;
        }
        merges.push(Merge {
            a: id[si].min(id[sj]),
            b: id[si].max(id[sj]),
            height: merged_d2.sqrt(),
            size: na + nb,
        });
        size[si] = na + nb;
        id[si] = k + step;
        alive[sj] = false;
    }

    Ok(ClusterTree { leaves: k, merges })
}

/// Element-wise reciprocal of an association matrix, for use as a
/// clustering dissimilarity. Zero associations map to ten times the largest
/// finite reciprocal (or 10 if every off-diagonal association is zero);
/// the diagonal is zero.
pub fn reciprocal_distance(phi: &[f64], k: usize) -> Result<Vec<f64>> {
    if phi.len() != k * k {
        return Err(Error::DimensionMismatch {
            context: "association matrix",
            expected: k * k,
            got: phi.len(),
        });
    }
    let mut out = vec![0.0; k * k];
    let mut max_finite: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let v = phi[i * k + j];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    context: "association matrix",
                });
            }
            if v > 0.0 {
                max_finite = max_finite.max(1.0 / v);
            }
        }
    }
    let sentinel = if max_finite > 0.0 { 10.0 * max_finite } else { 10.0 };
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let v = phi[i * k + j];
            out[i * k + j] = if v > 0.0 { 1.0 / v } else { sentinel };
        }
    }
    Ok(out)
}
