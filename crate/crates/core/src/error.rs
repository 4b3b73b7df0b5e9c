use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The network or structure is internally inconsistent.
    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Malformed network file; `context` names the offending layer or field.
    #[error("parse error ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("region budget exhausted after {partial} regions (cap {cap})")]
    RegionBudget { partial: usize, cap: usize },

    #[error("LP failure in region with pattern {pattern}: {message}")]
    Lp { pattern: String, message: String },

    /// A formula or construction was applied outside its hypothesis.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("no identified pair along this ray: {0}")]
    NoIdentifiedPair(String),

    #[error("construction verification failed (delta = {delta}): counted {counted}, expected at least {expected}")]
    Verification {
        delta: f64,
        counted: usize,
        expected: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
