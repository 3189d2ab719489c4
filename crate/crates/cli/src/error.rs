use std::fmt;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// A check ran and failed (exit 1).
    Verify(String),
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Reading or writing files failed (exit 3).
    Io(String),
    /// Anything else the engine reports (exit 1).
    Engine(mmbsn::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify(_) | CliError::Engine(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verify(m) | CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<mmbsn::Error> for CliError {
    fn from(e: mmbsn::Error) -> Self {
        use mmbsn::Error as E;
        match e {
            E::Io(_) | E::Image(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(_) | E::InvalidConfig(_) | E::ConfigParse(_) => {
                CliError::Usage(e.to_string())
            }
            E::Checkpoint(_) => CliError::Io(e.to_string()),
            other => CliError::Engine(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
