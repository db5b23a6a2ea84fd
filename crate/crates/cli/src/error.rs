use thiserror::Error;

/// Exit codes: 0 pass, 1 a check out of tolerance, 2 numerical-method or
/// I/O failure, 64 usage error.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] islt::error::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use islt::error::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(E::Domain(_) | E::Usage(_) | E::Size { .. }) => EXIT_USAGE,
            CliError::Core(_) | CliError::Io(_) | CliError::Json(_) => EXIT_NUMERICAL,
        }
    }
}
