use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coefficients are not elliptic: measured lower bound {measured:.3e} (cell {cell})")]
    NotElliptic { measured: f64, cell: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel component: input has mean {mean:.3e}, which L cannot invert")]
    KernelComponent { mean: f64 },

    #[error("singular solve: {0}")]
    Singular(String),

    #[error("krylov expm did not converge within {budget} steps")]
    KrylovNonConvergence { budget: usize },

    #[error("quadrature with {nodes} nodes did not converge (coarse/fine change {change:.3e})")]
    QuadratureNonConvergence { nodes: usize, change: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("overlapping sets: E and F must be disjoint with positive distance")]
    OverlappingSets,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
