use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Rejects nonpositive or non-finite values for parameters that must be > 0.
pub fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::param(name, format!("must be positive and finite, got {value}")));
    }
    Ok(())
}

/// Rejects negative or non-finite values for parameters that must be >= 0.
pub fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value < 0.0 || !value.is_finite() {
        return Err(Error::param(name, format!("must be nonnegative and finite, got {value}")));
    }
    Ok(())
}

/// Rejects probabilities outside (0, 1).
pub fn require_probability(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::param(name, format!("must lie in (0, 1), got {value}")));
    }
    Ok(())
}
