use std::fmt;
use std::process::ExitCode;

/// Exit status 2 for bad usage, configuration or input files; 1 for
/// failures while running.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<hashlab::Error> for CliError {
    fn from(e: hashlab::Error) -> Self {
        use hashlab::Error as E;
        let msg = e.to_string();
        match e {
            E::Format { .. } | E::Shape { .. } | E::InvalidArgument(_) => CliError::Usage(msg),
            E::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => CliError::Usage(msg),
            _ => CliError::Runtime(msg),
        }
    }
}
