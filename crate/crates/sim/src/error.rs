use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated file, expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: usize, actual: usize },
    #[error("image file holds {images} samples but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: label {label} at index {index} is not a digit")]
    InvalidLabel { path: PathBuf, index: usize, label: u8 },
    #[error("parse error at line {line}, column {column}: {message}\n  | {context}")]
    Parse { line: usize, column: usize, message: String, context: String },
    #[error("unsupported model format `{format}` version {found} (supported: `{expected_format}` version {supported})")]
    VersionMismatch { format: String, found: u32, expected_format: &'static str, supported: u32 },
    #[error("device profile: {0}")]
    Profile(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] crossbar_core::Error),
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SimError {
        let path = path.into();
        move |source| SimError::Io { path, source }
    }
}
