use std::fmt;
use std::path::Path;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 3;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn missing(path: &Path) -> Self {
        CliError { code: EXIT_MISSING, message: format!("missing artifact: {}", path.display()) }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INTERNAL, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<lbmrc::Error> for CliError {
    fn from(e: lbmrc::Error) -> Self {
        use lbmrc::Error as E;
        let code = match &e {
            E::InvalidConfig(_) | E::InvalidParameter(_) | E::InvalidLabel(_) => EXIT_CONFIG,
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
            _ => EXIT_INTERNAL,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::from(lbmrc::Error::from(e))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
