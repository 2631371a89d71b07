use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite log-likelihood contribution at row {row}")]
    NonFinite { row: usize },

    #[error("class {class} has zero posterior mass")]
    DegenerateClass { class: usize },

    #[error("all {} random starts failed", reasons.len())]
    FitFailure { reasons: Vec<(usize, String)> },

    #[error("{0} is not available for this model variant")]
    UnsupportedVariant(&'static str),

    #[error("constraint row {row} is linearly dependent on the rows before it")]
    SingularConstraint { row: usize },

    #[error("target {target} not reachable: achieved range [{low}, {high}]")]
    CalibrationRange { target: f64, low: f64, high: f64 },

    #[error("no covariance matrix attached to the fit")]
    MissingCovariance,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
