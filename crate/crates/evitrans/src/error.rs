//! Application-level errors with process exit codes.

use evitrans_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric divergence: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl AppError {
    /// Process exit code: 2 config error, 3 data error, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) | AppError::Io(_) => 3,
            AppError::Numeric(_) => 4,
            AppError::Core(core) => match core {
                CoreError::Config(_) => 2,
                CoreError::Numeric(_) | CoreError::Diverged { .. } => 4,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
