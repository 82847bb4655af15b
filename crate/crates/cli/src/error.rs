use std::io;

/// Failures mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or input data. Exit code 2.
    #[error("{0}")]
    User(String),
    /// Filesystem failure. Exit code 3.
    #[error("I/O error: {0}")]
    Io(String),
    /// A broken internal invariant. Exit code 4.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }
}

impl From<rangekit::Error> for CliError {
    fn from(e: rangekit::Error) -> Self {
        use rangekit::Error as E;
        match e {
            E::Io(err) => CliError::Io(err.to_string()),
            E::Numerical(_) => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to I/O failures.
pub(crate) fn at_path<T>(res: rangekit::Result<T>, path: &std::path::Path) -> CliResult<T> {
    res.map_err(|e| match e {
        rangekit::Error::Io(err) => CliError::Io(format!("{}: {err}", path.display())),
        other => CliError::from(other).with_context(&path.display().to_string()),
    })
}

impl CliError {
    pub(crate) fn with_context(self, ctx: &str) -> Self {
        match self {
            CliError::User(m) => CliError::User(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{ctx}: {m}")),
        }
    }
}
