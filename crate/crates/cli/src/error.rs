use std::io;
use std::path::Path;
use std::process::ExitCode;

/// Failure of a CLI operation, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad files, flags or data (exit code 1).
    #[error("{0}")]
    Input(String),
    /// The estimator failed (exit code 2).
    #[error("estimation failed: {0}")]
    Estimation(String),
    /// A numerical warning under `--strict` (exit code 3).
    #[error("numerical warning: {0}")]
    Strict(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 1,
            CliError::Estimation(_) => 2,
            CliError::Strict(_) => 3,
        })
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<lcmix_core::Error> for CliError {
    fn from(e: lcmix_core::Error) -> Self {
        match e {
            lcmix_core::Error::FitFailure { reasons } => {
                let detail: Vec<String> = reasons.iter().map(|(i, r)| format!("start {i}: {r}")).collect();
                CliError::Estimation(format!("all random starts failed ({})", detail.join("; ")))
            }
            lcmix_core::Error::DegenerateClass { .. } | lcmix_core::Error::NonFinite { .. } => {
                CliError::Estimation(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}
