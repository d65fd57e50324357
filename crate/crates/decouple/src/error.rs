use std::io;
use std::path::{Path, PathBuf};

/// Exit codes of the command-line tool.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Model(#[from] decouple_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {reason}", path.display())]
    Data { path: PathBuf, reason: String },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            AppError::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            AppError::Model(decouple_core::Error::Config(_)) => EXIT_USAGE,
            AppError::Model(_)
            | AppError::Io { .. }
            | AppError::Data { .. }
            | AppError::Csv(_)
            | AppError::Json(_) => EXIT_DATA,
        }
    }

    pub fn data(path: &Path, reason: impl Into<String>) -> Self {
        AppError::Data {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Attaches a path to I/O errors.
pub trait IoContext<T> {
    fn at(self, path: &Path) -> AppResult<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> AppResult<T> {
        self.map_err(|source| AppError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
