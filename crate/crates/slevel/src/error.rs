//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building or solving a problem.
#[derive(Debug, Error)]
pub enum SlevelError {
    /// Configuration rejected before any work was done.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric precondition on an operation input was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sampled or computed quantity became non-finite.
    #[error("non-finite value in component {component}: {context}")]
    NonFinite { component: usize, context: String },

    /// A mirror-descent iterate became non-finite.
    #[error("non-finite iterate at oracle iteration {iteration}")]
    NonFiniteIterate { iteration: u64 },

    /// An operation needs exact component evaluations this problem cannot provide.
    #[error("exact evaluation unavailable: {0}")]
    ExactUnavailable(String),

    /// The requested operation does not support this input shape.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Text input failed to parse; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The initial-bound estimator exhausted its halving budget without
    /// certifying a negative level-set value. The typical cause is a starting
    /// level at or below the optimal value, where no negative certificate exists.
    #[error(
        "initial-bound estimator hit the halving cap after {halvings} rounds \
         (last upper estimate {last_upper}); the starting level is likely not \
         above the optimal value"
    )]
    BoundEstimateCap { halvings: u32, last_upper: f64 },

    /// Bisection for the level-set root could not bracket a sign change.
    #[error("level-set root not bracketed: {0}")]
    RootNotBracketed(String),

    /// An internal invariant failed; this is a bug, not a user error.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SlevelError>;
