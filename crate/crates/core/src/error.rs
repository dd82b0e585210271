use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the keyword-selection pipeline.
///
/// Variants are grouped by how a caller should react: configuration errors
/// mean the requested run cannot be set up, input errors mean the data on
/// disk or the arguments are unusable, evaluation errors mean a classifier
/// score could not be formed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Evaluation(_) => "evaluation",
            Error::Io { .. } => "io",
            Error::Internal(_) => "internal",
        }
    }

    /// Process exit code for the CLI: 2 config, 3 input (including I/O),
    /// 4 evaluation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_) | Error::Io { .. } => 3,
            Error::Evaluation(_) => 4,
            Error::Internal(_) => 1,
        }
    }

    /// Prefixes the message with extra context while keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Input(m) => Error::Input(format!("{ctx}: {m}")),
            Error::Evaluation(m) => Error::Evaluation(format!("{ctx}: {m}")),
            Error::Internal(m) => Error::Internal(format!("{ctx}: {m}")),
            e @ Error::Io { .. } => e,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Internal(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("json: {e}"))
    }
}
