use std::path::Path;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value or command-line override that cannot be used.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Unreadable or inconsistent data file. `line` is 1-based, 0 when the
    /// problem is not tied to a line.
    #[error("{path}:{line}: {message}")]
    Data { path: String, line: usize, message: String },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Core(#[from] hyql_core::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl ToString) -> Self {
        Error::Config {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn data(path: impl AsRef<Path>, line: usize, message: impl ToString) -> Self {
        Error::Data {
            path: path.as_ref().display().to_string(),
            line,
            message: message.to_string(),
        }
    }

    /// Process exit status for this error: 2 configuration, 3 I/O, 4 bad or
    /// incompatible data, 5 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } => 3,
            Error::Data { .. } | Error::Incompatible(_) => 4,
            Error::Core(hyql_core::Error::Malformed(_)) => 4,
            Error::Core(_) => 5,
        }
    }
}
