//! Quasi-Bayesian structure learning for sparse discrete graphical models.
//!
//! The library fits one node-conditional model per variable under a
//! spike-and-slab prior, using per-node MCMC kernels that can run
//! independently and in parallel, then combines the per-node chains into
//! symmetrized edge estimates, credible intervals, and cluster trees.
//!
//! Layering, bottom up:
//! - [`model`]: state space, statistics, conditional likelihoods, exact
//!   enumeration, and Gibbs data generation;
//! - [`prior`]: hyperparameters, activation vectors, the penalized
//!   sparsified log-likelihood both samplers target;
//! - [`pg`]: exact Polya-Gamma variates and their test oracle;
//! - [`sampler`]: the gradient-proposal kernel and the conjugate
//!   augmentation kernel for binary models;
//! - [`engine`]: per-node runs, deterministic seeding, parallel scheduling;
//! - [`summary`]: pooled estimates, intervals, metrics, clustering.
//!
//! With the default `parallel` feature the engine fans nodes out over a
//! rayon pool; without it the same API runs sequentially. Results are
//! bit-identical either way because every node owns an isolated,
//! seed-derived random stream.

pub mod engine;
pub mod error;
pub mod model;
pub mod pg;
pub mod prior;
pub mod sampler;
pub mod stats;
pub mod summary;

pub use error::{Error, Result};
