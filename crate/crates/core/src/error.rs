use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(String),
    #[error("index misconfigured: query radius {radius} exceeds cell size {cell}")]
    IndexMisconfiguration { radius: f64, cell: f64 },
    #[error("empty neighborhood")]
    EmptyNeighborhood,
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("linear solver stalled after {iterations} iterations, residual {residual:e}")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("energy increased from {before:e} to {after:e} at step {step}")]
    EnergyIncrease { step: usize, before: f64, after: f64 },
    #[error("front changed topology at step {step}")]
    TopologyChange { step: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
