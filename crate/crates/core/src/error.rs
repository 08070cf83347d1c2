use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    Param { name: &'static str, reason: String },

    /// A region exceeded the dense-assembly cap.
    #[error("region of {points} points exceeds the cap of {cap}")]
    SizeCap { points: usize, cap: usize },

    /// Operator spec evaluated to a non-finite value.
    #[error("operator spec error: {0}")]
    Spec(String),

    /// A restriction that must be invertible is singular.
    #[error("singular block: {0}")]
    Singular(String),

    /// A lemma hypothesis could not even be set up (e.g. uncovered points).
    #[error("hypothesis error: {0}")]
    Hypothesis(String),

    /// All data points were censored; nothing to fit.
    #[error("all samples censored: {0}")]
    Censored(String),

    /// Geometry construction failed.
    #[error("geometry error: {0}")]
    Geometry(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }
}
