//! Error type shared across the crate.

use alloc::string::String;

/// Errors produced by numerical routines, model construction and training.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inputs whose dimensions do not line up.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A matrix that could not be factorized even after jitter escalation.
    #[error("numerical degeneracy: {matrix} not positive definite after jitter {max_jitter:e}")]
    NumericalDegeneracy { matrix: &'static str, max_jitter: f64 },

    /// A NaN or infinity surfaced during the backward pass.
    #[error("non-finite gradient at node {node} ({op})")]
    NonFiniteGradient { node: usize, op: &'static str },

    /// The ELBO evaluated to NaN or infinity.
    #[error("non-finite ELBO contribution at data index {index}")]
    NonFiniteElbo { index: usize },

    /// Too many consecutive rejected optimization steps.
    #[error("training diverged: {consecutive} consecutive non-finite steps")]
    TrainingDivergence { consecutive: usize },

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An inconsistent or unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A metric whose definition breaks down on the given data.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Invalid observations (censoring invariant violations, negative counts, ...).
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = core::result::Result<T, Error>;
