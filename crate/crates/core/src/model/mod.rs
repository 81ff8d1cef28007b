//! Discrete graphical model definition: state space, sufficient statistics,
//! observation storage, and interaction matrices.
//!
//! A model over p nodes with m colors per node is determined by two
//! statistic functions, a per-node function C(s) and a pairwise function
//! C(s, t), together with a symmetric p x p interaction matrix theta.
//! Colors are 0-based integers 0..m-1 throughout; shifting from external
//! encodings happens at ingestion, not here.

mod exact;
mod gibbs;
mod likelihood;

pub use exact::exact_log_pmf;
pub use gibbs::gibbs_generate;
pub use likelihood::{
    conditional_distribution, conditional_log_lik_gradient, conditional_log_likelihood,
    pseudo_log_likelihood,
};
pub(crate) use likelihood::conditional_ll_masked;

use crate::error::{Error, Result};

/// Which built-in statistic family a spec was constructed from. Kept for
/// serialization and reporting; numerical code only reads the tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatisticFamily {
    /// C(s) = s, C(s, t) = s * t. The m = 2 case is the classical binary model.
    Identity,
    /// C(s) = (s / (m-1))^2, C(s, t) = s * t / (m-1)^2.
    ScaledQuadratic,
    /// Caller-supplied tables.
    Explicit,
}

/// Model specification: dimensions plus tabulated statistic functions.
#[derive(Clone, Debug, PartialEq)]
pub struct PottsSpec {
    p: usize,
    m: usize,
    family: StatisticFamily,
    /// node_stat[s] = C(s), length m.
    node_stat: Vec<f64>,
    /// pair_stat[s * m + t] = C(s, t), length m * m.
    pair_stat: Vec<f64>,
}

impl PottsSpec {
    /// Identity statistics; any m >= 2 is accepted, m = 2 gives the binary model.
    pub fn ising_identity(p: usize, m: usize) -> Result<Self> {
        Self::check_dims(p, m)?;
        let node_stat = (0..m).map(|s| s as f64).collect();
        let pair_stat = (0..m * m)
            .map(|k| ((k / m) * (k % m)) as f64)
            .collect();
        Ok(PottsSpec {
            p,
            m,
            family: StatisticFamily::Identity,
            node_stat,
            pair_stat,
        })
    }

    /// Range-normalized quadratic statistics, keeping exponents bounded as m grows.
    pub fn scaled_quadratic(p: usize, m: usize) -> Result<Self> {
        Self::check_dims(p, m)?;
        let d = (m - 1) as f64;
        let node_stat = (0..m).map(|s| (s as f64 / d).powi(2)).collect();
        let pair_stat = (0..m * m)
            .map(|k| ((k / m) * (k % m)) as f64 / (d * d))
            .collect();
        Ok(PottsSpec {
            p,
            m,
            family: StatisticFamily::ScaledQuadratic,
            node_stat,
            pair_stat,
        })
    }

    /// Explicit statistic tables: node_stat has length m, pair_stat is m x m row-major.
    pub fn explicit(p: usize, m: usize, node_stat: Vec<f64>, pair_stat: Vec<f64>) -> Result<Self> {
        Self::check_dims(p, m)?;
        if node_stat.len() != m {
            return Err(Error::DimensionMismatch {
                context: "node statistic table",
                expected: m,
                got: node_stat.len(),
            });
        }
        if pair_stat.len() != m * m {
            return Err(Error::DimensionMismatch {
                context: "pair statistic table",
                expected: m * m,
                got: pair_stat.len(),
            });
        }
        if !node_stat.iter().chain(pair_stat.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "statistic tables",
            });
        }
        Ok(PottsSpec {
            p,
            m,
            family: StatisticFamily::Explicit,
            node_stat,
            pair_stat,
        })
    }

    fn check_dims(p: usize, m: usize) -> Result<()> {
        if p == 0 {
            return Err(Error::InvalidModelSpec("p must be positive".into()));
        }
        if m < 2 {
            return Err(Error::InvalidModelSpec(format!("m must be >= 2, got {m}")));
        }
        if m > u8::MAX as usize {
            return Err(Error::InvalidModelSpec(format!("m must fit in u8, got {m}")));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn family(&self) -> &StatisticFamily {
        &self.family
    }

    /// C(s)
    #[inline]
    pub fn node_stat(&self, s: u8) -> f64 {
        self.node_stat[s as usize]
    }

    /// C(s, t)
    #[inline]
    pub fn pair_stat(&self, s: u8, t: u8) -> f64 {
        self.pair_stat[s as usize * self.m + t as usize]
    }

    /// True when the tables coincide with the binary multiplicative model
    /// (m = 2, C(s) = s, C(s, t) = s * t), however the instance was built.
    /// The conjugate-augmentation sampler is exact only in this case.
    pub fn is_binary_multiplicative(&self) -> bool {
        self.m == 2
            && self.node_stat == [0.0, 1.0]
            && self.pair_stat == [0.0, 0.0, 0.0, 1.0]
    }
}

/// Observations: n rows of p colors each, stored row-major as u8.
/// Rows are exchangeable; no ordering semantics attach to the row index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<u8>,
}

impl DataMatrix {
    /// Builds from row-major values; every entry must be < m.
    pub fn new(n: usize, p: usize, values: Vec<u8>, m: usize) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                context: "data matrix buffer",
                expected: n * p,
                got: values.len(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if (v as usize) >= m {
                return Err(Error::ValueOutOfRange {
                    row: k / p,
                    col: k % p,
                    value: v as i64,
                    m,
                });
            }
        }
        Ok(DataMatrix { n, p, values })
    }

    /// An empty data set over p nodes: n = 0 is legal and all likelihood
    /// terms degenerate to zero.
    pub fn empty(p: usize) -> Self {
        DataMatrix {
            n: 0,
            p,
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        debug_assert!(row < self.n && col < self.p);
        self.values[row * self.p + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u8] {
        &self.values[row * self.p..(row + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.values.chunks_exact(self.p)
    }

    /// True when every entry of the column equals the first one. Degenerate
    /// columns make the node's off-diagonal structure unidentifiable.
    pub fn column_is_constant(&self, col: usize) -> bool {
        if self.n <= 1 {
            return true;
        }
        let first = self.get(0, col);
        (1..self.n).all(|i| self.get(i, col) == first)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }
}

/// Dense p x p interaction matrix. Row r holds the node-r parameter vector
/// theta_r, so entry (r, j) reads "node r's coupling to j" and entry (r, r)
/// is the node-r main effect. Generators must be symmetric; per-node
/// estimates generally are not.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaMatrix {
    p: usize,
    values: Vec<f64>,
}

impl ThetaMatrix {
    pub fn zeros(p: usize) -> Self {
        ThetaMatrix {
            p,
            values: vec![0.0; p * p],
        }
    }

    pub fn from_rows(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * p {
            return Err(Error::DimensionMismatch {
                context: "theta matrix buffer",
                expected: p * p,
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "theta matrix",
            });
        }
        Ok(ThetaMatrix { p, values })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.values[r * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, r: usize, j: usize, v: f64) {
        self.values[r * self.p + j] = v;
    }

    /// theta_r as a slice.
    #[inline]
    pub fn node_row(&self, r: usize) -> &[f64] {
        &self.values[r * self.p..(r + 1) * self.p]
    }

    pub fn node_row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.p..(r + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Symmetry check with a small absolute-relative tolerance; generators
    /// are required to pass this before simulation.
    pub fn require_symmetric(&self) -> Result<()> {
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
                if (a - b).abs() > tol {
                    return Err(Error::AsymmetricTheta { i, j, a, b });
                }
            }
        }
        Ok(())
    }

    /// Number of structurally active entries: nonzero off-diagonals counted
    /// once per unordered pair, plus nonzero diagonals.
    pub fn support_size(&self) -> usize {
        let mut count = 0;
        for i in 0..self.p {
            for j in i..self.p {
                if self.get(i, j) != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}
