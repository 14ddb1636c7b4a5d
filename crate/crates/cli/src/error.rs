use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] chtorus::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if is_blowup(e) => EXIT_BLOWUP,
            _ => EXIT_CONFIG,
        }
    }
}

/// Errors that end a run as a numerical blow-up rather than a usage error.
pub fn is_blowup(e: &chtorus::Error) -> bool {
    matches!(
        e,
        chtorus::Error::BlowUp { .. }
            | chtorus::Error::DiffeoBreakdown { .. }
            | chtorus::Error::NonFinite
            | chtorus::Error::SingularJacobian { .. }
            | chtorus::Error::NonMonotone { .. }
    )
}
