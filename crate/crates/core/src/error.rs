use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller handed us something structurally wrong (bad shapes, out-of-range
    /// indices, empty masks, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Invalid hyperparameter or configuration value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Arithmetic produced a non-finite value or an iteration diverged.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dataset bundle could not be parsed; carries file and line context.
    #[error("load error in {file}:{line}: {msg}")]
    Load {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn load(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
