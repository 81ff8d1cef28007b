//! Polya-Gamma data-augmentation Gibbs kernel for one node of a binary
//! model with multiplicative pair statistics.
//!
//! With colors in {0, 1} and products as interaction statistics, the
//! conditional of the node is logistic in psi = <x_delta, theta_delta>,
//! where x has a constant 1 in the node's own slot and the neighbor colors
//! elsewhere. Augmenting each observation with omega_i ~ PG(1, psi_i) makes
//! the likelihood Gaussian in psi, so the active block has a closed-form
//! multivariate Normal full conditional and every activation flip has an
//! exact acceptance ratio that is quadratic in theta_j.
//!
//! One iteration: draw omega at the current psi, draw the active block
//! jointly from its Normal conditional, refresh inactive coordinates from
//! the spike, then attempt one flip per coordinate with omega held fixed.
//! The flip sweep keeps a running psi so each attempt costs O(n).

use super::{
    clamp_theta, sample_inactive, scan_indices, KernelDiagnostics, NodeKernel, NodeState,
    ScanOrder,
};
use crate::error::{Error, Result};
use crate::model::{DataMatrix, PottsSpec};
use crate::pg::pg_draw;
use crate::prior::Hyperparams;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct PgKernel<'a> {
    data: &'a DataMatrix,
    hp: &'a Hyperparams,
    scan: ScanOrder,
    state: NodeState,
    diag: KernelDiagnostics,
    /// Sorted active coordinate indices, kept in sync with state.delta.
    active: Vec<usize>,
    /// kappa_i = z_i - 1/2 for the node's own column.
    kappa: Vec<f64>,
    /// b_j = <x_j, kappa>, fixed for the whole run.
    b: Vec<f64>,
    /// Running psi_i = <x_delta^i, theta_delta>.
    psi: Vec<f64>,
    /// Latest augmentation draws, one per observation.
    omega: Vec<f64>,
}

impl<'a> PgKernel<'a> {
    pub fn new(
        state: NodeState,
        data: &'a DataMatrix,
        hp: &'a Hyperparams,
        spec: &PottsSpec,
    ) -> Result<Self> {
        Self::with_scan(state, data, hp, spec, ScanOrder::Systematic)
    }

    pub fn with_scan(
        state: NodeState,
        data: &'a DataMatrix,
        hp: &'a Hyperparams,
        spec: &PottsSpec,
        scan: ScanOrder,
    ) -> Result<Self> {
        hp.validate()?;
        if !spec.is_binary_multiplicative() {
            return Err(Error::SamplerRequiresBinaryModel);
        }
        if state.p() != spec.p() {
            return Err(Error::DimensionMismatch {
                context: "node state length",
                expected: spec.p(),
                got: state.p(),
            });
        }
        if data.p() != spec.p() {
            return Err(Error::DimensionMismatch {
                context: "data column count",
                expected: spec.p(),
                got: data.p(),
            });
        }
        state.check_pinning(hp)?;
        let n = data.n();
        let p = data.p();
        let node = state.node;
        let kappa: Vec<f64> = (0..n)
            .map(|i| data.get(i, node) as f64 - 0.5)
            .collect();
        let mut kernel = PgKernel {
            data,
            hp,
            scan,
            active: state.delta.active_indices(),
            state,
            diag: KernelDiagnostics::default(),
            kappa,
            b: vec![0.0; p],
            psi: vec![0.0; n],
            omega: vec![0.0; n],
        };
        for j in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += kernel.x(j, i) * kernel.kappa[i];
            }
            kernel.b[j] = acc;
        }
        kernel.recompute_psi();
        Ok(kernel)
    }

    /// Design entry for coordinate j and observation i: 1 on the node's own
    /// slot, the observed neighbor color otherwise.
    #[inline]
    fn x(&self, j: usize, i: usize) -> f64 {
        if j == self.state.node {
            1.0
        } else {
            self.data.get(i, j) as f64
        }
    }

    fn recompute_psi(&mut self) {
        self.psi.fill(0.0);
        for &j in &self.active {
            let w = self.state.theta[j];
            if w == 0.0 {
                continue;
            }
            for i in 0..self.data.n() {
                self.psi[i] += w * self.x(j, i);
            }
        }
    }

    /// One augmentation sweep: omega_i ~ PG(1, psi_i).
    pub fn draw_omega(&mut self, rng: &mut ChaCha8Rng) {
        for i in 0..self.data.n() {
            self.omega[i] = pg_draw(self.psi[i], rng);
        }
    }

    /// Posterior mean of the active block given the current omega:
    /// (X'WX + I/rho)^{-1} X'kappa restricted to active columns.
    #[cfg(test)]
    fn active_mean(&self) -> Result<DVector<f64>> {
        let (chol, rhs) = self.active_factor()?;
        Ok(chol.solve(&rhs))
    }

    fn active_factor(&self) -> Result<(Cholesky<f64, nalgebra::Dyn>, DVector<f64>)> {
        let k = self.active.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for i in 0..self.data.n() {
            let w = self.omega[i];
            if w == 0.0 {
                continue;
            }
            for (ai, &ja) in self.active.iter().enumerate() {
                let xa = self.x(ja, i);
                if xa == 0.0 {
                    continue;
                }
                for (bi, &jb) in self.active.iter().enumerate().skip(ai) {
                    a[(ai, bi)] += w * xa * self.x(jb, i);
                }
            }
        }
        for ai in 0..k {
            a[(ai, ai)] += 1.0 / self.hp.rho;
            for bi in (ai + 1)..k {
                a[(bi, ai)] = a[(ai, bi)];
            }
        }
        let rhs = DVector::from_iterator(k, self.active.iter().map(|&j| self.b[j]));
        let chol = Cholesky::new(a).ok_or(Error::NonFinite {
            context: "active block precision factorization",
        })?;
        Ok((chol, rhs))
    }

    /// Joint Normal draw of every active coordinate given omega, then a psi
    /// rebuild. No-op when the pattern is empty.
    pub fn active_block_step(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let k = self.active.len();
        if k == 0 {
            return Ok(());
        }
        let (chol, rhs) = self.active_factor()?;
        let mu = chol.solve(&rhs);
        let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = chol
            .l()
            .transpose()
            .solve_upper_triangular(&v)
            .ok_or(Error::NonFinite {
                context: "active block triangular solve",
            })?;
        for (ai, &j) in self.active.clone().iter().enumerate() {
            self.state.theta[j] = clamp_theta(mu[ai] + z[ai], &mut self.diag);
        }
        self.recompute_psi();
        Ok(())
    }

    /// Flip statistic for coordinate j at the current (theta, omega, psi).
    /// The 0 -> 1 move accepts with probability min(1, exp(-tau)), the
    /// 1 -> 0 move with min(1, exp(tau)).
    fn tau_stat(&self, j: usize, a_j: f64) -> f64 {
        let w = self.state.theta[j];
        let mut s = 0.0;
        for i in 0..self.data.n() {
            s += self.x(j, i) * self.omega[i] * self.psi[i];
        }
        let c = if self.state.delta.is_active(j) {
            s - w * a_j
        } else {
            s
        };
        -self.hp.selection_log_odds()
            + 0.5 * (1.0 / self.hp.rho - 1.0 / self.hp.gamma) * w * w
            + 0.5 * w * w * a_j
            + w * (c - self.b[j])
    }

    /// Weighted squared norm of column j: x_j' diag(omega) x_j.
    fn weighted_self(&self, j: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.data.n() {
            let xv = self.x(j, i);
            if xv != 0.0 {
                acc += self.omega[i] * xv * xv;
            }
        }
        acc
    }

    fn flip_with(&mut self, j: usize, a_j: f64, rng: &mut ChaCha8Rng) -> bool {
        let was_active = self.state.delta.is_active(j);
        let tau = self.tau_stat(j, a_j);
        let log_acc = if was_active { tau } else { -tau };
        self.diag.flips_attempted += 1;
        if rng.gen::<f64>().ln() >= log_acc {
            return false;
        }
        let w = self.state.theta[j];
        if w != 0.0 {
            let dw = if was_active { -w } else { w };
            for i in 0..self.data.n() {
                self.psi[i] += dw * self.x(j, i);
            }
        }
        self.state.delta.flip(j);
        match self.active.binary_search(&j) {
            Ok(pos) => {
                self.active.remove(pos);
            }
            Err(pos) => {
                self.active.insert(pos, j);
            }
        }
        self.diag.flips_made += 1;
        true
    }

    /// One flip attempt for coordinate j using the stored omega.
    pub fn delta_flip(&mut self, j: usize, rng: &mut ChaCha8Rng) -> Result<bool> {
        if self.hp.fix_diagonal_active && j == self.state.node {
            return Err(Error::InvalidConfig(
                "flip attempted on pinned diagonal".into(),
            ));
        }
        let a_j = self.weighted_self(j);
        Ok(self.flip_with(j, a_j, rng))
    }

    pub fn into_state(self) -> NodeState {
        self.state
    }

    fn set_omega(&mut self, omega: Vec<f64>) -> Result<()> {
        if omega.len() != self.data.n() {
            return Err(Error::DimensionMismatch {
                context: "augmentation vector length",
                expected: self.data.n(),
                got: omega.len(),
            });
        }
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFinite {
                context: "augmentation vector",
            });
        }
        self.omega = omega;
        Ok(())
    }
}

impl NodeKernel for PgKernel<'_> {
    fn iterate(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        self.draw_omega(rng);
        self.active_block_step(rng)?;
        sample_inactive(&mut self.state, self.hp, rng)?;
        // Omega stays fixed for the sweep, so the column norms can be
        // computed once up front.
        let a: Vec<f64> = (0..self.state.p()).map(|j| self.weighted_self(j)).collect();
        for j in scan_indices(self.scan, self.state.p(), rng) {
            if self.hp.fix_diagonal_active && j == self.state.node {
                continue;
            }
            self.flip_with(j, a[j], rng);
        }
        Ok(())
    }

    fn state(&self) -> &NodeState {
        &self.state
    }

    fn diagnostics(&self) -> &KernelDiagnostics {
        &self.diag
    }
}

/// Standalone augmentation plus active block draw. Returns the omega vector
/// the block draw conditioned on.
pub fn pg_active_step(
    state: &mut NodeState,
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut kernel = PgKernel::new(state.clone(), data, hp, spec)?;
    kernel.draw_omega(rng);
    kernel.active_block_step(rng)?;
    let omega = kernel.omega.clone();
    *state = kernel.into_state();
    Ok(omega)
}

/// Standalone flip attempt for one coordinate, conditioning on a caller
/// supplied augmentation vector.
pub fn delta_flip_pg(
    state: &mut NodeState,
    j: usize,
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    omega: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let mut kernel = PgKernel::new(state.clone(), data, hp, spec)?;
    kernel.set_omega(omega.to_vec())?;
    let flipped = kernel.delta_flip(j, rng)?;
    *state = kernel.into_state();
    Ok(flipped)
}

/// One full kernel iteration on a borrowed state, accumulating diagnostics.
pub fn pg_node_iteration(
    state: &mut NodeState,
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    scan: ScanOrder,
    rng: &mut ChaCha8Rng,
    diag: &mut KernelDiagnostics,
) -> Result<()> {
    let mut kernel = PgKernel::with_scan(state.clone(), data, hp, spec, scan)?;
    kernel.iterate(rng)?;
    diag.merge(&kernel.diag);
    *state = kernel.into_state();
    Ok(())
}
