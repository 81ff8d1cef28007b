//! Fit orchestration: per-node chain initialization, MCMC execution,
//! sample retention, and deterministic seeding.
//!
//! Every node runs an independent chain on its own ChaCha8 stream seeded by
//! a fixed mix of the master seed and the node index, so the fit is a pure
//! function of (data, hyperparameters, model, config) no matter how many
//! workers execute it. With the `parallel` feature (default) `run_all`
//! fans nodes out over the rayon pool; `run_all_serial` always runs them
//! one by one and produces the same result.

pub mod lasso;

use crate::error::{Error, Result};
use crate::model::{DataMatrix, PottsSpec};
use crate::prior::{Hyperparams, SelectionVector};
use crate::sampler::{KernelDiagnostics, MalaKernel, NodeKernel, NodeState, PgKernel, ScanOrder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Mala,
    PgGibbs,
}

/// How each node chain starts.
#[derive(Clone, Debug, PartialEq)]
pub enum InitStrategy {
    /// Penalized pseudo-likelihood point with its support as the pattern.
    Lasso,
    /// Zero parameters, diagonal-only pattern.
    Zero,
    /// Caller-provided per-node states.
    Given(Vec<NodeInit>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeInit {
    pub theta: Vec<f64>,
    pub delta: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcConfig {
    pub sampler: SamplerKind,
    /// Total kernel iterations per node, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every thin-th post-burn-in iterate.
    pub thin: usize,
    pub master_seed: u64,
    pub init: InitStrategy,
    pub scan: ScanOrder,
    /// Penalty weight for lasso initialization; None picks sqrt(ln p / n).
    pub lasso_lambda: Option<f64>,
}

impl McmcConfig {
    pub fn new(sampler: SamplerKind, iterations: usize, burn_in: usize, thin: usize, master_seed: u64) -> Self {
        McmcConfig {
            sampler,
            iterations,
            burn_in,
            thin,
            master_seed,
            init: InitStrategy::Lasso,
            scan: ScanOrder::Systematic,
            lasso_lambda: None,
        }
    }

    /// Number of samples each node retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thinning interval must be at least 1".into()));
        }
        if self.iterations - self.burn_in < self.thin {
            return Err(Error::InvalidConfig(format!(
                "no sample survives: iterations - burn_in = {} is below thin = {}",
                self.iterations - self.burn_in,
                self.thin
            )));
        }
        if let Some(lam) = self.lasso_lambda {
            if !lam.is_finite() || lam < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "lasso penalty must be finite and nonnegative, got {lam}"
                )));
            }
        }
        if let InitStrategy::Given(inits) = &self.init {
            if inits.len() != p {
                return Err(Error::DimensionMismatch {
                    context: "given initial states",
                    expected: p,
                    got: inits.len(),
                });
            }
            for (r, init) in inits.iter().enumerate() {
                if init.theta.len() != p || init.delta.len() != p {
                    return Err(Error::DimensionMismatch {
                        context: "given initial state length",
                        expected: p,
                        got: init.theta.len().max(init.delta.len()),
                    }
                    .at_node(r));
                }
            }
        }
        Ok(())
    }
}

/// Seed of node r's RNG stream. SplitMix64 finalizer applied to the master
/// seed shifted by a per-node multiple of the golden-ratio increment. This
/// mapping is part of the output contract: changing it changes every fit,
/// so it stays fixed across versions.
pub fn node_seed(master_seed: u64, node: usize) -> u64 {
    let mut z = master_seed.wrapping_add((node as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Caps the shared worker pool at `workers` threads. Must run before the
/// first parallel fit; results do not depend on the cap, only wall time
/// does. A no-op when the `parallel` feature is off.
#[cfg(feature = "parallel")]
pub fn configure_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("worker pool setup failed: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn configure_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be positive".into()));
    }
    Ok(())
}

/// Retained draws of one node chain, stored flat (sample-major).
#[derive(Clone, Debug)]
pub struct NodeSamples {
    pub node: usize,
    pub p: usize,
    pub retained: usize,
    pub seed: u64,
    /// Constant-column policy applied: off-diagonals pinned to zero.
    pub degenerate: bool,
    pub diagnostics: KernelDiagnostics,
    pub elapsed: Duration,
    theta: Vec<f64>,
    delta: Vec<bool>,
}

impl NodeSamples {
    /// Builds a sample record from flat sample-major buffers, as produced by
    /// a run or read back from disk.
    pub fn from_parts(
        node: usize,
        p: usize,
        seed: u64,
        theta: Vec<f64>,
        delta: Vec<bool>,
    ) -> Result<Self> {
        if p == 0 || theta.len() % p != 0 || delta.len() != theta.len() || node >= p {
            return Err(Error::DimensionMismatch {
                context: "node sample buffers",
                expected: p,
                got: theta.len(),
            });
        }
        Ok(NodeSamples {
            node,
            p,
            retained: theta.len() / p,
            seed,
            degenerate: false,
            diagnostics: KernelDiagnostics::default(),
            elapsed: Duration::ZERO,
            theta,
            delta,
        })
    }

    pub fn theta_row(&self, t: usize) -> &[f64] {
        &self.theta[t * self.p..(t + 1) * self.p]
    }

    pub fn delta_row(&self, t: usize) -> &[bool] {
        &self.delta[t * self.p..(t + 1) * self.p]
    }

    /// All retained values of coordinate j, in chain order.
    pub fn theta_coord(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.theta[j..].iter().step_by(self.p).copied()
    }

    pub fn delta_coord(&self, j: usize) -> impl Iterator<Item = bool> + '_ {
        self.delta[j..].iter().step_by(self.p).copied()
    }

    /// Equality over everything reproducible (wall-clock excluded).
    pub fn deterministic_eq(&self, other: &NodeSamples) -> bool {
        self.node == other.node
            && self.p == other.p
            && self.retained == other.retained
            && self.seed == other.seed
            && self.degenerate == other.degenerate
            && self.diagnostics == other.diagnostics
            && self.theta == other.theta
            && self.delta == other.delta
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub p: usize,
    pub m: usize,
    pub nodes: Vec<NodeSamples>,
    pub config: McmcConfig,
}

impl FitResult {
    pub fn node(&self, r: usize) -> &NodeSamples {
        &self.nodes[r]
    }

    pub fn retained(&self) -> usize {
        self.config.retained()
    }

    /// Equality over everything reproducible (wall-clock excluded).
    pub fn deterministic_eq(&self, other: &FitResult) -> bool {
        self.p == other.p
            && self.m == other.m
            && self.config == other.config
            && self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.deterministic_eq(b))
    }
}

/// Engine progress events, delivered from whichever thread runs the node.
#[derive(Clone, Debug)]
pub enum Progress {
    NodeStarted {
        node: usize,
    },
    NodeFinished {
        node: usize,
        diagnostics: KernelDiagnostics,
        retained: usize,
    },
}

enum Driver<'a> {
    Mala(MalaKernel<'a>),
    Pg(PgKernel<'a>),
}

impl Driver<'_> {
    /// One kernel iteration; in locked mode only the diagonal moves.
    fn sweep(&mut self, locked: bool, node: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        match self {
            Driver::Mala(k) => {
                if locked {
                    k.active_step(node, rng).map(|_| ())
                } else {
                    k.iterate(rng)
                }
            }
            Driver::Pg(k) => {
                if locked {
                    k.draw_omega(rng);
                    k.active_block_step(rng)
                } else {
                    k.iterate(rng)
                }
            }
        }
    }

    fn state(&self) -> &NodeState {
        match self {
            Driver::Mala(k) => k.state(),
            Driver::Pg(k) => k.state(),
        }
    }

    fn diagnostics(&self) -> &KernelDiagnostics {
        match self {
            Driver::Mala(k) => k.diagnostics(),
            Driver::Pg(k) => k.diagnostics(),
        }
    }
}

fn initial_state(
    r: usize,
    data: &DataMatrix,
    spec: &PottsSpec,
    hp: &Hyperparams,
    cfg: &McmcConfig,
    degenerate: bool,
) -> Result<NodeState> {
    let p = spec.p();
    if degenerate {
        let mut delta = SelectionVector::all_inactive(p);
        delta.set(r, true);
        let mut theta = vec![0.0; p];
        if data.n() > 0 {
            // Seed the diagonal from the one-parameter restricted fit (a
            // dominant penalty zeroes everything else) so the locked chain
            // starts inside the posterior bulk instead of far in a tail
            // where drifted proposals are always rejected.
            let restricted = lasso::lasso_init(r, data, spec, 1e6)?;
            theta[r] = restricted.theta[r];
        }
        return NodeState::new(r, theta, delta);
    }
    match &cfg.init {
        InitStrategy::Zero => {
            let mut delta = SelectionVector::all_inactive(p);
            delta.set(r, true);
            NodeState::new(r, vec![0.0; p], delta)
        }
        InitStrategy::Lasso => {
            let lam = cfg
                .lasso_lambda
                .unwrap_or_else(|| lasso::default_lambda(data.n(), p));
            let init = lasso::lasso_init(r, data, spec, lam)?;
            let mut delta = init.delta;
            if hp.fix_diagonal_active {
                delta.set(r, true);
            }
            NodeState::new(r, init.theta, delta)
        }
        InitStrategy::Given(inits) => {
            let init = &inits[r];
            NodeState::new(r, init.theta.clone(), SelectionVector::from_bits(init.delta.clone()))
        }
    }
}

/// Runs one node chain to completion on the given seed.
pub fn run_node(
    r: usize,
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<NodeSamples> {
    cfg.validate(spec.p())?;
    hp.validate()?;
    if data.p() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "data column count",
            expected: spec.p(),
            got: data.p(),
        });
    }
    if r >= spec.p() {
        return Err(Error::NodeOutOfRange { node: r, p: spec.p() });
    }
    let start = Instant::now();
    let p = spec.p();
    let degenerate = data.n() > 0 && data.column_is_constant(r);
    if degenerate {
        log::warn!("node {r}: data column is constant; fitting the diagonal only");
    }
    let state = initial_state(r, data, spec, hp, cfg, degenerate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut driver = match cfg.sampler {
        SamplerKind::Mala => Driver::Mala(MalaKernel::new(state, data, hp, spec, cfg.scan)?),
        SamplerKind::PgGibbs => Driver::Pg(PgKernel::with_scan(state, data, hp, spec, cfg.scan)?),
    };

    let retained = cfg.retained();
    let mut theta_buf = Vec::with_capacity(retained * p);
    let mut delta_buf = Vec::with_capacity(retained * p);
    for t in 1..=cfg.iterations {
        driver.sweep(degenerate, r, &mut rng)?;
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            let s = driver.state();
            theta_buf.extend_from_slice(&s.theta);
            delta_buf.extend_from_slice(s.delta.bits());
        }
    }

    Ok(NodeSamples {
        node: r,
        p,
        retained,
        seed,
        degenerate,
        diagnostics: *driver.diagnostics(),
        elapsed: start.elapsed(),
        theta: theta_buf,
        delta: delta_buf,
    })
}

fn check_run_inputs(data: &DataMatrix, hp: &Hyperparams, spec: &PottsSpec, cfg: &McmcConfig) -> Result<()> {
    cfg.validate(spec.p())?;
    hp.validate()?;
    if data.p() != spec.p() {
        return Err(Error::DimensionMismatch {
            context: "data column count",
            expected: spec.p(),
            got: data.p(),
        });
    }
    Ok(())
}

/// Fits every node sequentially on the current thread.
pub fn run_all_serial(
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
) -> Result<FitResult> {
    run_all_serial_with_progress(data, hp, spec, cfg, |_| {})
}

pub fn run_all_serial_with_progress<F>(
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
    progress: F,
) -> Result<FitResult>
where
    F: Fn(Progress),
{
    check_run_inputs(data, hp, spec, cfg)?;
    let mut nodes = Vec::with_capacity(spec.p());
    for r in 0..spec.p() {
        progress(Progress::NodeStarted { node: r });
        let out = run_node(r, data, hp, spec, cfg, node_seed(cfg.master_seed, r))
            .map_err(|e| e.at_node(r))?;
        progress(Progress::NodeFinished {
            node: r,
            diagnostics: out.diagnostics,
            retained: out.retained,
        });
        nodes.push(out);
    }
    Ok(FitResult {
        p: spec.p(),
        m: spec.m(),
        nodes,
        config: cfg.clone(),
    })
}

/// Fits every node, using the rayon pool when the `parallel` feature is on.
/// The result is bit-identical to `run_all_serial` for any worker count.
pub fn run_all(
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
) -> Result<FitResult> {
    run_all_with_progress(data, hp, spec, cfg, |_| {})
}

#[cfg(feature = "parallel")]
pub fn run_all_with_progress<F>(
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
    progress: F,
) -> Result<FitResult>
where
    F: Fn(Progress) + Sync,
{
    use rayon::prelude::*;
    check_run_inputs(data, hp, spec, cfg)?;
    let nodes = (0..spec.p())
        .into_par_iter()
        .map(|r| {
            progress(Progress::NodeStarted { node: r });
            let out = run_node(r, data, hp, spec, cfg, node_seed(cfg.master_seed, r))
                .map_err(|e| e.at_node(r))?;
            progress(Progress::NodeFinished {
                node: r,
                diagnostics: out.diagnostics,
                retained: out.retained,
            });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        p: spec.p(),
        m: spec.m(),
        nodes,
        config: cfg.clone(),
    })
}

#[cfg(not(feature = "parallel"))]
pub fn run_all_with_progress<F>(
    data: &DataMatrix,
    hp: &Hyperparams,
    spec: &PottsSpec,
    cfg: &McmcConfig,
    progress: F,
) -> Result<FitResult>
where
    F: Fn(Progress) + Sync,
{
    run_all_serial_with_progress(data, hp, spec, cfg, progress)
}
