use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Backend,
    Data,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Backend => 3,
            ErrorKind::Data => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    /// A library error raised while validating configuration.
    pub fn config_from(e: dstkit::Error) -> Self {
        Self::config(e.to_string())
    }

    /// The single stderr line printed on failure.
    pub fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: ErrorKind,
            exit_code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Line {
            error: self.kind,
            exit_code: self.kind.exit_code(),
            message: &self.message.replace('\n', " "),
        })
        .expect("error line serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl From<dstkit::Error> for CliError {
    fn from(e: dstkit::Error) -> Self {
        use dstkit::Error as E;
        let kind = match &e {
            E::Argument(_) => ErrorKind::Config,
            E::Backend { .. } | E::Protocol { .. } | E::Batch { .. } | E::Trainer(_) => {
                ErrorKind::Backend
            }
            E::Data { .. } | E::Encoding { .. } | E::Io { .. } => ErrorKind::Data,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}
