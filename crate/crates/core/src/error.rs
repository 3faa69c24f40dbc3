use std::path::PathBuf;

use crate::statecore::TurnRef;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A corpus or record file is missing, unreadable or malformed.
    #[error("data error in {}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("cannot encode value {value:?}: contains the reserved delimiter")]
    Encoding { value: String },

    /// A model backend failed after retries were exhausted.
    #[error("backend error at {turn}: {message}")]
    Backend { turn: TurnRef, message: String },

    /// A remote backend answered with a response that violates the wire contract.
    #[error("protocol error at {turn}: {message}")]
    Protocol { turn: TurnRef, message: String },

    /// Too many per-turn failures within one batch.
    #[error("{failed} of {total} turns failed during {stage}")]
    Batch {
        stage: &'static str,
        failed: usize,
        total: usize,
    },

    #[error("trainer hook failed: {0}")]
    Trainer(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised by a model backend (transport, protocol, batch).
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::Backend { .. } | Error::Protocol { .. } | Error::Batch { .. }
        )
    }
}
