use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] bergman_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("acceptance failed: {}", .0.join(", "))]
    Acceptance(Vec<String>),
}

impl CliError {
    /// 0 success, 1 usage or invalid input, 2 numerical non-convergence,
    /// 3 acceptance failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } => 1,
            CliError::Acceptance(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
