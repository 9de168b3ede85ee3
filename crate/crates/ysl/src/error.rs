use std::path::PathBuf;

/// Errors surfaced by the runners and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ysl_core::Error),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("spectral run diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 3,
            Error::Model(ysl_core::Error::Diverged { .. })
            | Error::Model(ysl_core::Error::NewtonFailed { .. }) => 3,
            _ => 2,
        }
    }
}
