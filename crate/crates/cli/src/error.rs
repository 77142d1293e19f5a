use std::fmt;

use scca_core::error::SccaError;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    Usage(String),
    Core(SccaError),
}

impl CliError {
    /// 2 for degenerate solutions, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                SccaError::EmptySupport { .. }
                | SccaError::DegenerateInput(_)
                | SccaError::InsufficientFactors { .. }
                | SccaError::Singularity(_)
                | SccaError::IndefiniteMatrix(_),
            ) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<SccaError> for CliError {
    fn from(e: SccaError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(SccaError::Io(e))
    }
}
