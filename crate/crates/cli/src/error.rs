use std::process::ExitCode;

/// Failures split by who can fix them: the user (exit 2) or us (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::User(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl From<cpmiss::Error> for CliError {
    fn from(e: cpmiss::Error) -> Self {
        use cpmiss::Error as E;
        match e {
            E::Config(_)
            | E::Data(_)
            | E::Dimension { .. }
            | E::InsufficientData(_)
            | E::Domain(_)
            | E::Calibration(_)
            | E::UnreachableGroup { .. } => CliError::User(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Errors while writing output are ours; errors while reading input are the
/// user's, so call sites choose via these helpers.
pub fn user_io(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::User(format!("{}: {e}", path.display()))
}

pub fn internal_io(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}
