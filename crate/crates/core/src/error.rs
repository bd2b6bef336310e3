use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies on or outside the boundary of a kernel domain.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// A mirror step produced a dual point outside `int dom h*`.
    #[error("step leaves the domain: {0}")]
    StepOutOfDomain(String),

    #[error("closed-form prox inapplicable: {0}")]
    ClosedFormInapplicable(String),

    #[error(
        "inner solver stopped after {iterations} iterations with residual {residual:e} (tolerance {tolerance:e})"
    )]
    InnerSolverDiverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A reference quantity (x*, F*) is needed but unknown.
    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
