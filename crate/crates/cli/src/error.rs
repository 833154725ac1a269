use std::fmt;

use lingeval_core::ErrorClass;

/// Failure of a command or request.
#[derive(Debug)]
pub enum AppError {
    Core(lingeval_core::Error),
    /// Bad arguments or request fields.
    Usage(String),
    /// Unexpected I/O outside the store (stdout, config files).
    Io(std::io::Error),
}

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            AppError::Core(e) => e.class(),
            AppError::Usage(_) => ErrorClass::Input,
            AppError::Io(_) => ErrorClass::Internal,
        }
    }

    /// Process exit status: 1 internal, 2 input, 3 precondition.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Internal => 1,
            ErrorClass::Input => 2,
            ErrorClass::Precondition => 3,
        }
    }

    /// Stable machine-readable code for API error bodies.
    pub fn code(&self) -> &'static str {
        use lingeval_core::Error as E;
        match self {
            AppError::Usage(_) => "bad_request",
            AppError::Io(_) => "internal",
            AppError::Core(e) => match e {
                E::NotAWarning { .. } => "not_a_warning",
                E::UnknownItem(_) => "unknown_item",
                E::UnknownRun(_) => "unknown_run",
                E::InvalidPattern { .. } => "invalid_pattern",
                E::WarningVerdict => "invalid_verdict",
                E::NoSuite => "no_suite",
                E::NoRuns => "no_runs",
                E::VersionMismatch { .. } => "version_mismatch",
                E::NoCommonItems => "no_common_items",
                E::NoValidItems => "no_valid_items",
                _ => match e.class() {
                    ErrorClass::Input => "bad_input",
                    ErrorClass::Precondition => "precondition",
                    ErrorClass::Internal => "internal",
                },
            },
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Core(e) => e.fmt(f),
            AppError::Usage(m) => f.write_str(m),
            AppError::Io(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for AppError {}

impl From<lingeval_core::Error> for AppError {
    fn from(e: lingeval_core::Error) -> Self {
        AppError::Core(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

pub type AppResult<T> = Result<T, AppError>;
