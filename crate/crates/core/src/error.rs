use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("iteration limit of {iterations} reached (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("solver instability: {0}")]
    Instability(String),

    #[error("ratio undefined: reference symplectic pairing {value:e} is too small")]
    UndefinedRatio { value: f64 },

    #[error("source is not orthogonal to the kernel (projection {projection:e})")]
    IncompatibleSource { projection: f64 },

    #[error("Krylov solve stalled after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("constrained Rayleigh quotient is not positive ({value:e})")]
    Indefinite { value: f64 },

    #[error("solution blew up; last stable time {t_last_stable}")]
    Blowup { t_last_stable: f64 },

    #[error("modulation fit diverged after {iterations} iterations (residual {residual:e})")]
    FitDivergence { iterations: usize, residual: f64 },

    #[error("ODE step rejected at t={t}: energy jump {jump:e}")]
    StepRejected { t: f64, jump: f64 },

    #[error("observer failed at t={t}: {source}")]
    Observer { t: f64, source: Box<Error> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
