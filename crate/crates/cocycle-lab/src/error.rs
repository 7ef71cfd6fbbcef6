use cocycle_core::LabError;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input data (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// Loss of hyperbolicity or non-convergence (exit code 3).
    #[error("{0}")]
    Numeric(String),
    /// Invalid edge bracket (exit code 4).
    #[error("{0}")]
    Bracket(String),
    /// File-system failure (exit code 1).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Bracket(_) => 4,
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        let msg = e.to_string();
        match e {
            LabError::BracketInvalid { .. } => CliError::Bracket(msg),
            LabError::InvalidInput { .. }
            | LabError::InvalidPotential { .. }
            | LabError::DegenerateRotation { .. }
            | LabError::CouplingTooSmall { .. }
            | LabError::SpanTooNarrow { .. }
            | LabError::MissingSystemConstants { .. }
            | LabError::FibreMismatch { .. } => CliError::Validation(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
