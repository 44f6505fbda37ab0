use thiserror::Error;

/// Errors raised across the learning stack.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Malformed input: dimension mismatch, non-finite values, out-of-domain arguments.
    #[error("input error: {0}")]
    Input(String),

    /// Invalid configuration, e.g. a kernel scale whose Taylor step is too coarse.
    #[error("configuration error: {0}")]
    Config(String),

    /// The LP solver failed numerically (tiny pivots, iteration cap).
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A convex body turned out to have no interior point.
    #[error("empty body")]
    EmptyBody,

    /// A feedback cut emptied a knowledge set. Honest feedback never does this.
    #[error("inconsistent feedback: {0}")]
    InconsistentFeedback(String),

    /// A mathematical invariant that should hold by construction was violated.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// A query generator could not satisfy its postcondition.
    #[error("generation error: {0}")]
    Generation(String),

    /// The lower-bound adversary ran out of room on the sphere.
    #[error("adversary exhausted: {0}")]
    AdversaryExhausted(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{what}: non-finite coefficient")));
    }
    Ok(())
}
