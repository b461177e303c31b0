use std::fmt;
use std::path::{Path, PathBuf};

/// Exit status for a configuration or usage error.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for an I/O or input-format error.
pub const EXIT_IO: i32 = 3;

/// Where in an input a parse error occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
        }
    }
}

/// Malformed input text or bytes, without file context.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{location}: {message}")]
pub struct ParseError {
    pub location: Location,
    pub message: String,
}

impl ParseError {
    pub fn line(line: usize, message: impl Into<String>) -> Self {
        Self { location: Location::Line(line), message: message.into() }
    }

    pub fn byte(offset: usize, message: impl Into<String>) -> Self {
        Self { location: Location::Byte(offset), message: message.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qsw_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, source: ParseError) -> Self {
        CliError::Parse { path: path.to_path_buf(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Parse { .. } => EXIT_IO,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
