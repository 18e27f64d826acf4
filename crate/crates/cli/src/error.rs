use thiserror::Error;

/// Failures of a run, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}, key `{key}`: {msg}")]
    Config { line: usize, key: String, msg: String },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Verification(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::InvalidParameter(_) => 6,
        }
    }
}

impl From<medflow::Error> for CliError {
    fn from(e: medflow::Error) -> Self {
        use medflow::Error as E;
        match e {
            E::Io(m) => CliError::Io(m),
            E::SolverFailure { .. } | E::EnergyIncrease { .. } | E::TopologyChange { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::InvalidParameter(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
