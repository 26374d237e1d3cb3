use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Failures of the harness and CLI. Each class has its own process exit
/// code, listed in [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: row {row}, column '{column}': {message}")]
    Parse { path: PathBuf, row: usize, column: String, message: String },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error(transparent)]
    Core(#[from] covadapt_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Core(covadapt_core::Error::Config(message.into()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::MissingColumn { .. } => "missing_column",
            Error::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use covadapt_core::Error as C;
        match self {
            Error::Io { .. } => 3,
            Error::Parse { .. } => 4,
            Error::MissingColumn { .. } => 5,
            Error::Core(C::Config(_)) => 6,
            Error::Core(C::Geometry(_)) => 7,
            Error::Core(C::Data(_)) => 8,
            Error::Core(C::Numerical(_)) => 9,
            Error::Core(C::Degenerate(_)) => 10,
            Error::Core(C::Oracle(_)) => 11,
        }
    }

    /// Single-line machine-readable form written to stderr by the CLI.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            code: i32,
            message: String,
        }
        let line = Line { error: self.kind(), code: self.exit_code(), message: self.to_string() };
        serde_json::to_string(&line).expect("error line serializes")
    }
}
