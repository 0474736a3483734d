use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zero-charge field")]
    ZeroCharge,

    #[error("unresolved: {0}")]
    Unresolved(String),

    #[error("out of box: {0}")]
    OutOfBox(String),

    #[error("gradient flow did not converge after {iters} iterations (last residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("not a minimizer candidate: J = {0:e}")]
    NotMinimizer(f64),

    #[error("non-finite field value at step {step}")]
    NonFinite { step: usize },

    #[error("boundary touch: {0}")]
    BoundaryTouch(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::ZeroCharge => "zero_charge",
            Error::Unresolved(_) => "unresolved",
            Error::OutOfBox(_) => "out_of_box",
            Error::NotConverged { .. } => "not_converged",
            Error::NotMinimizer(_) => "not_minimizer",
            Error::NonFinite { .. } => "non_finite",
            Error::BoundaryTouch(_) => "boundary_touch",
            Error::Snapshot(_) => "snapshot",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
