//! Spike-and-slab prior over (delta, theta) and the resulting target kernel.
//!
//! Each coordinate of a node parameter vector carries a Bernoulli(q)
//! activation flag. Active coordinates get a wide Normal(0, rho) slab,
//! inactive ones a narrow Normal(0, gamma) spike, and the likelihood is
//! always evaluated at the sparsified vector (inactive coordinates zeroed).
//! Up to an additive constant the log posterior kernel for one node is
//!
//!   |delta|_1 * (ln(q/(1-q)) + ln(gamma/rho)/2) + penalized_log_lik,
//!
//! which is the quantity both samplers leave invariant.

use crate::error::{Error, Result};
use crate::model::{conditional_ll_masked, DataMatrix, PottsSpec};
use serde::{Deserialize, Serialize};

/// All scalar knobs shared by the samplers. Constructed via `from_defaults`
/// plus `with_*` overrides; `validate` runs on every construction path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Sparsity exponent: q = p^-(1+u).
    pub u: f64,
    /// Prior activation probability per coordinate.
    pub q: f64,
    /// Slab variance.
    pub rho: f64,
    /// Spike variance.
    pub gamma: f64,
    /// Random-walk scale of the gradient-informed proposal.
    pub sigma: f64,
    /// Gradient norm cap; large enough to be inactive except on blowups.
    pub grad_cap: f64,
    /// Keep the main-effect coordinate permanently active.
    pub fix_diagonal_active: bool,
}

impl Hyperparams {
    /// Data-size driven defaults: q = p^-(1+u), gamma = c0 / max(n, p),
    /// rho = c1 * sqrt(n / ln p), with u = 2, c0 = 0.1, c1 = 1.
    pub fn from_defaults(n: usize, p: usize) -> Result<Self> {
        Self::from_scaling(n, p, 2.0, 0.1, 1.0)
    }

    /// Same scaling rules with explicit (u, c0, c1).
    pub fn from_scaling(n: usize, p: usize, u: f64, c0: f64, c1: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidHyperparams(format!(
                "default scaling needs p >= 2, got {p}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidHyperparams(
                "default scaling needs n >= 1".into(),
            ));
        }
        let q = (p as f64).powf(-(1.0 + u));
        let gamma = c0 / n.max(p) as f64;
        let rho = c1 * (n as f64 / (p as f64).ln()).sqrt();
        let hp = Hyperparams {
            u,
            q,
            rho,
            gamma,
            sigma: 0.1,
            grad_cap: 100.0,
            fix_diagonal_active: true,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        self.q = q;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_grad_cap(mut self, c: f64) -> Result<Self> {
        self.grad_cap = c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_fix_diagonal_active(mut self, fix: bool) -> Self {
        self.fix_diagonal_active = fix;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidHyperparams(msg));
        if !(self.q > 0.0 && self.q < 1.0) {
            return fail(format!("q must lie in (0,1), got {}", self.q));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail(format!("rho must be positive, got {}", self.rho));
        }
        if self.gamma > self.rho {
            return fail(format!(
                "spike variance gamma = {} exceeds slab variance rho = {}",
                self.gamma, self.rho
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.grad_cap > 0.0) {
            return fail(format!("grad_cap must be positive, got {}", self.grad_cap));
        }
        Ok(())
    }

    /// ln(q/(1-q)) + ln(gamma/rho)/2: the log change of the posterior kernel
    /// per additional active coordinate, excluding likelihood terms.
    pub fn selection_log_odds(&self) -> f64 {
        (self.q / (1.0 - self.q)).ln() + 0.5 * (self.gamma / self.rho).ln()
    }
}

/// Activation pattern of one node parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionVector {
    bits: Vec<bool>,
}

impl SelectionVector {
    pub fn all_inactive(p: usize) -> Self {
        SelectionVector {
            bits: vec![false; p],
        }
    }

    pub fn all_active(p: usize) -> Self {
        SelectionVector {
            bits: vec![true; p],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        SelectionVector { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn is_active(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn set(&mut self, j: usize, active: bool) {
        self.bits[j] = active;
    }

    pub fn flip(&mut self, j: usize) {
        self.bits[j] = !self.bits[j];
    }

    /// Number of active coordinates. For a binary vector the l0 and l1 norms
    /// coincide, so this serves as both.
    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| self.bits[j]).collect()
    }

    pub fn inactive_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| !self.bits[j]).collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Copy of theta with inactive coordinates zeroed.
    pub fn mask_vector(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(j, &v)| if self.bits[j] { v } else { 0.0 })
            .collect()
    }
}

/// Log prior density of (delta, theta_r) up to an additive constant, fixed
/// so the all-inactive, all-zero configuration scores 0.
pub fn log_prior(delta: &SelectionVector, theta_r: &[f64], hp: &Hyperparams) -> Result<f64> {
    if delta.len() != theta_r.len() {
        return Err(Error::DimensionMismatch {
            context: "selection vector length",
            expected: theta_r.len(),
            got: delta.len(),
        });
    }
    let mut quad = 0.0;
    for (j, &v) in theta_r.iter().enumerate() {
        let var = if delta.is_active(j) { hp.rho } else { hp.gamma };
        quad += v * v / (2.0 * var);
    }
    Ok(delta.count_active() as f64 * hp.selection_log_odds() - quad)
}

/// The h kernel: conditional log-likelihood of the sparsified vector minus
/// the slab quadratic on active coordinates and the spike quadratic on
/// inactive ones. Together with `selection_log_odds` this determines the
/// posterior kernel both samplers target.
pub fn penalized_log_lik(
    r: usize,
    delta: &SelectionVector,
    theta_r: &[f64],
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
) -> Result<f64> {
    if delta.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "selection vector length",
            expected: spec.p(),
            got: delta.len(),
        });
    }
    if theta_r.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "theta_r length",
            expected: spec.p(),
            got: theta_r.len(),
        });
    }
    if r >= spec.p() {
        return Err(Error::NodeOutOfRange { node: r, p: spec.p() });
    }
    if data.p() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "data column count",
            expected: spec.p(),
            got: data.p(),
        });
    }
    let support = delta.active_indices();
    let ll = conditional_ll_masked(r, theta_r, &support, data, spec);
    let mut active_quad = 0.0;
    let mut inactive_quad = 0.0;
    for (j, &v) in theta_r.iter().enumerate() {
        if delta.is_active(j) {
            active_quad += v * v;
        } else {
            inactive_quad += v * v;
        }
    }
    Ok(ll - active_quad / (2.0 * hp.rho) - inactive_quad / (2.0 * hp.gamma))
}
