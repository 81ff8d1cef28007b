//! Per-node MCMC kernels.
//!
//! Both kernels leave the same target invariant: the spike-and-slab
//! posterior kernel over (delta_r, theta_r) built from the sparsified
//! conditional likelihood. `mala` works for any color count through
//! gradient-informed proposals; `pg_gibbs` is the conjugate data
//! augmentation scheme, exact but restricted to binary multiplicative
//! models. All accept/flip decisions are taken in the log domain.

pub mod mala;
pub mod pg_gibbs;

use crate::error::{Error, Result};
use crate::prior::{Hyperparams, SelectionVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use mala::{
    delta_flip_mala, mala_active_step, mala_node_iteration, truncated_gradient, MalaKernel,
};
pub use pg_gibbs::{delta_flip_pg, pg_active_step, pg_node_iteration, PgKernel};

/// Hard guard on parameter magnitude. Values beyond this are clamped and
/// counted; in sane configurations the counter stays at zero.
pub const THETA_CLAMP: f64 = 1e3;

/// Current position of one node chain.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub node: usize,
    pub theta: Vec<f64>,
    pub delta: SelectionVector,
}

impl NodeState {
    pub fn new(node: usize, theta: Vec<f64>, delta: SelectionVector) -> Result<Self> {
        if delta.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                context: "node state delta length",
                expected: theta.len(),
                got: delta.len(),
            });
        }
        if node >= theta.len() {
            return Err(Error::NodeOutOfRange {
                node,
                p: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite() || v.abs() > THETA_CLAMP) {
            return Err(Error::NonFinite {
                context: "node state theta",
            });
        }
        Ok(NodeState { node, theta, delta })
    }

    /// Fresh chain start: zero parameters, only the main effect active when
    /// the diagonal is pinned.
    pub fn cold_start(node: usize, p: usize, hp: &Hyperparams) -> Result<Self> {
        let mut delta = SelectionVector::all_inactive(p);
        if hp.fix_diagonal_active {
            delta.set(node, true);
        }
        NodeState::new(node, vec![0.0; p], delta)
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    /// Checks the pinned-diagonal invariant against the hyperparameters.
    pub fn check_pinning(&self, hp: &Hyperparams) -> Result<()> {
        if hp.fix_diagonal_active && !self.delta.is_active(self.node) {
            return Err(Error::InvalidConfig(format!(
                "node {}: diagonal must stay active under fix_diagonal_active",
                self.node
            )));
        }
        Ok(())
    }
}

/// Counters accumulated over a run. Acceptance counts refer to coordinate
/// updates of active parameters; flip counts to activation moves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct KernelDiagnostics {
    pub active_proposals: u64,
    pub active_accepts: u64,
    pub flips_attempted: u64,
    pub flips_made: u64,
    pub clamps: u64,
}

impl KernelDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.active_proposals == 0 {
            0.0
        } else {
            self.active_accepts as f64 / self.active_proposals as f64
        }
    }

    pub fn flip_rate(&self) -> f64 {
        if self.flips_attempted == 0 {
            0.0
        } else {
            self.flips_made as f64 / self.flips_attempted as f64
        }
    }

    pub fn merge(&mut self, other: &KernelDiagnostics) {
        self.active_proposals += other.active_proposals;
        self.active_accepts += other.active_accepts;
        self.flips_attempted += other.flips_attempted;
        self.flips_made += other.flips_made;
        self.clamps += other.clamps;
    }
}

/// Order in which activation flips sweep the coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScanOrder {
    /// Ascending coordinate index every iteration.
    #[default]
    Systematic,
    /// A fresh uniform permutation per iteration, drawn from the node rng.
    Shuffled,
}

pub(crate) fn scan_indices(order: ScanOrder, p: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p).collect();
    if order == ScanOrder::Shuffled {
        use rand::seq::SliceRandom;
        idx.shuffle(rng);
    }
    idx
}

/// Clamps a parameter into [-THETA_CLAMP, THETA_CLAMP], counting the event.
#[inline]
pub(crate) fn clamp_theta(v: f64, diag: &mut KernelDiagnostics) -> f64 {
    if v.abs() > THETA_CLAMP {
        diag.clamps += 1;
        v.clamp(-THETA_CLAMP, THETA_CLAMP)
    } else {
        v
    }
}

/// Redraws every inactive coordinate from the spike Normal(0, gamma), in
/// ascending index order. Touches nothing else and never reads data.
pub fn sample_inactive<R: Rng + ?Sized>(
    state: &mut NodeState,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    hp.validate()?;
    let sd = hp.gamma.sqrt();
    let mut dummy = KernelDiagnostics::default();
    for j in 0..state.p() {
        if !state.delta.is_active(j) {
            let z: f64 = rng.sample(StandardNormal);
            state.theta[j] = clamp_theta(sd * z, &mut dummy);
        }
    }
    Ok(())
}

/// Common driver interface so the engine can treat both kernels uniformly.
pub trait NodeKernel {
    /// One full iteration: active-coordinate refresh, inactive redraw,
    /// activation flip sweep.
    fn iterate(&mut self, rng: &mut ChaCha8Rng) -> Result<()>;
    fn state(&self) -> &NodeState;
    fn diagnostics(&self) -> &KernelDiagnostics;
}
