use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target ({x1}, {x2}, {x3}) mm is outside the reachable workspace")]
    UnreachableTarget { x1: f64, x2: f64, x3: f64 },

    #[error("target lies on the base axis; base yaw is undefined")]
    DegenerateAxis,

    #[error("grid point {index} is not reachable")]
    UnreachableGridPoint { index: usize },

    #[error("{0} is not a perfect cube")]
    NotACube(usize),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Process exit code used by the CLI: 2 for bad configuration, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::NotACube(_) => 2,
            _ => 3,
        }
    }
}
