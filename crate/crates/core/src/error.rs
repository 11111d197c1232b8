use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdlaError {
    #[error("dimension {0} unsupported (expected 2..={max})", max = crate::lattice::MAX_DIM)]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("walk exceeded step cap of {cap} steps")]
    StepCapExceeded { cap: u64 },
    #[error("configuration has mass at {site} outside the ball of radius {radius}")]
    ConfigOutsideDomain { site: String, radius: f64 },
    #[error("domain has {sites} sites, over the exact-solve budget of {budget}")]
    DomainTooLarge { sites: usize, budget: usize },
    #[error("operation requires d = {required}, got d = {got}")]
    WrongDimension { required: usize, got: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("lambda = {lambda} outside the admissible range [0, {max}]")]
    LambdaOutOfRange { lambda: f64, max: f64 },
    #[error("hypothesis {name} violated: {detail}")]
    HypothesisViolated { name: &'static str, detail: String },
    #[error("solver did not reach tolerance {tol:e} (residual {residual:e} after {iterations} iterations)")]
    SolverNotConverged { tol: f64, residual: f64, iterations: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IdlaError>;
