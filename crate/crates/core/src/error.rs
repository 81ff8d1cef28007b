use thiserror::Error;

/// Errors surfaced by the core library. Variants carry enough context to
/// identify the offending node, index, or value without a debugger.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("data value {value} at row {row}, column {col} outside 0..{m}")]
    ValueOutOfRange {
        row: usize,
        col: usize,
        value: i64,
        m: usize,
    },

    #[error("node index {node} out of range for p = {p}")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("state space m^p = {m}^{p} exceeds the enumeration limit 2^20")]
    StateSpaceTooLarge { m: usize, p: usize },

    #[error("theta matrix not symmetric at ({i}, {j}): {a} vs {b}")]
    AsymmetricTheta { i: usize, j: usize, a: f64, b: f64 },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid model specification: {0}")]
    InvalidModelSpec(String),

    #[error("sampler requires a binary multiplicative model (m = 2, identity statistics)")]
    SamplerRequiresBinaryModel,

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {need} retained samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("data column {col} for node {node} is constant; off-diagonal structure is unidentifiable")]
    DegenerateColumn { node: usize, col: usize },

    #[error("group {index} is empty")]
    EmptyGroup { index: usize },

    #[error("reference vector for node {node} has zero norm")]
    ZeroTruthNorm { node: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the node it occurred on; used by the engine so
    /// parallel failures stay attributable.
    pub fn at_node(self, node: usize) -> Error {
        Error::Node {
            node,
            source: Box::new(self),
        }
    }
}
