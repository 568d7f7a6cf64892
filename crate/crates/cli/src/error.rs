use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("resource limit: {0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Invariant(_) => 2,
            Self::Resource(_) => 3,
        }
    }
}

impl From<lcuprep::Error> for CliError {
    fn from(e: lcuprep::Error) -> Self {
        use lcuprep::Error as E;
        match e {
            E::InvalidParams(_)
            | E::SiteOutOfRange { .. }
            | E::InvalidTruncation(_)
            | E::DuplicateBitstring(_)
            | E::LengthMismatch { .. }
            | E::ZeroMagnitudes
            | E::Overshoot(_)
            | E::InvalidArgument(_)
            | E::Parse(_)
            | E::Io(_) => Self::Validation(e.to_string()),
            _ => Self::Invariant(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
