use thiserror::Error;

/// Harness failures, grouped by the CLI exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unreadable, malformed or out-of-range configuration (exit code 1).
    #[error("configuration error: {0}")]
    Config(String),

    /// Output could not be written (exit code 1).
    #[error("i/o error: {0}")]
    Io(String),

    /// A numerical routine failed or a numerical check exceeded its tolerance (exit code 2).
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Numerical(_) => 2,
        }
    }
}

impl From<fim_core::Error> for HarnessError {
    fn from(e: fim_core::Error) -> Self {
        match e {
            fim_core::Error::Config { .. } => HarnessError::Config(e.to_string()),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
