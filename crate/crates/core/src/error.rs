use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {left} vs {right} interior nodes")]
    GridMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("incompatible time grids: {0}")]
    IncompatibleGrids(String),
    #[error("Newton iteration diverged at step {step} (residual {residual:e})")]
    NewtonDivergence { step: usize, residual: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("missing required key '{0}'")]
    MissingKey(String),
    #[error("config: {0}")]
    Config(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
