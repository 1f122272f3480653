use std::path::Path;

/// Failures surfaced to the shell. Each maps to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, specs or input data.
    #[error("{0}")]
    User(String),
    /// Filesystem or other environment trouble.
    #[error("{0}")]
    Environment(String),
    /// A rerun produced different bytes than its manifest records.
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] gammamix::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use gammamix::Error as E;
        match self {
            CliError::User(_) => 2,
            CliError::Environment(_) => 3,
            CliError::Mismatch(_) => 1,
            CliError::Model(e) => match e {
                E::Parse { .. }
                | E::Domain { .. }
                | E::Config(_)
                | E::InvalidDatum { .. }
                | E::Unsupported(_) => 2,
                E::Quadrature { .. } | E::InvalidState(_) => 1,
            },
        }
    }

    pub(crate) fn write(path: &Path, e: std::io::Error) -> Self {
        CliError::Environment(format!("cannot write {}: {e}", path.display()))
    }

    pub(crate) fn read(path: &Path, e: std::io::Error) -> Self {
        CliError::User(format!("cannot read {}: {e}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
