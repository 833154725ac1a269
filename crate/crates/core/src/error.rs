use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classes of failure; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input files, bad patterns, unknown identifiers.
    Input,
    /// A precondition on store state was not met.
    Precondition,
    /// I/O or other unexpected failure.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("item {item:?}: phenomenon {phenomenon:?} is not in the taxonomy")]
    UnknownPhenomenon { item: String, phenomenon: String },
    #[error("item {item:?}: category {found:?} disagrees with taxonomy category {expected:?} for phenomenon {phenomenon:?}")]
    CategoryMismatch {
        item: String,
        phenomenon: String,
        expected: String,
        found: String,
    },
    #[error("item {item:?}: invalid pattern {pattern:?}: {reason}")]
    InvalidPattern {
        item: String,
        pattern: String,
        reason: String,
    },
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("missing outputs for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingOutputs(Vec<String>),
    #[error("outputs for unknown item(s): {}", .0.join(", "))]
    UnknownOutputs(Vec<String>),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("unknown run {0:?}")]
    UnknownRun(String),
    #[error("suite version mismatch: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },
    #[error("run {run:?}, item {item:?} is not a pending warning (current verdict: {verdict})")]
    NotAWarning {
        run: String,
        item: String,
        verdict: String,
    },
    #[error("manual verdicts must be pass or fail")]
    WarningVerdict,
    #[error("store has no suite; initialise it first")]
    NoSuite,
    #[error("store already holds suite {0:?}")]
    SuiteExists(String),
    #[error("no runs to report on")]
    NoRuns,
    #[error("group {0:?} has no items after filtering")]
    EmptyGroup(String),
    #[error("runs share no common valid items")]
    NoCommonItems,
    #[error("no item is free of warnings in every run; resolve pending warnings first")]
    NoValidItems,
    #[error("length mismatch: {hypotheses} hypotheses vs {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("store is corrupt: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotAWarning { .. }
            | Error::NoSuite
            | Error::SuiteExists(_)
            | Error::NoRuns
            | Error::NoValidItems
            | Error::VersionMismatch { .. } => ErrorClass::Precondition,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorClass::Input,
            Error::Io { .. } | Error::Corrupt(_) => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }
}
