use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error{}: {message}", location(key.as_deref(), *line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Numerical(#[from] vlevel_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: truncated payload: expected {expected} bytes, found {actual}", path.display())]
    Truncated { path: PathBuf, expected: u64, actual: u64 },
    #[error("{}: unsupported schema version {found:?} (supported: {supported})", path.display())]
    UnsupportedVersion {
        path: PathBuf,
        found: String,
        supported: &'static str,
    },
    #[error("{}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("budget exceeded: {required} integrations required, budget is {budget}")]
    Budget { required: u64, budget: u64 },
}

fn location(key: Option<&str>, line: Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" at `{k}` (line {l})"),
        (Some(k), None) => format!(" at `{k}`"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            line: None,
            message: message.into(),
        }
    }

    /// Process exit status: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Budget { .. } => 2,
            Error::Numerical(e) if is_parameter_error(e) => 2,
            Error::Numerical(_) => 3,
            Error::Io { .. } | Error::Truncated { .. } | Error::UnsupportedVersion { .. } | Error::Malformed { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "io",
        }
    }
}

fn is_parameter_error(e: &vlevel_core::Error) -> bool {
    use vlevel_core::Error as E;
    match e {
        E::InvalidParameter { .. } | E::WindowOverlap { .. } | E::NonUniformAxis(_) | E::DimensionMismatch(_) => true,
        E::AtArea { source, .. } => is_parameter_error(source),
        _ => false,
    }
}
