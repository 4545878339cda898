use thiserror::Error;

/// Errors produced by the g3m-core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient reserve: trade requires {requested} but pool holds {available}")]
    InsufficientReserve { requested: f64, available: f64 },

    #[error("initial condition violated: {0}")]
    InitialCondition(String),

    #[error("series `{series}` decreases at index {index}")]
    Monotonicity { series: &'static str, index: usize },

    #[error("grid mismatch: expected {expected} points, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not positive semidefinite: {0}")]
    Covariance(String),

    #[error("ellipticity violated: volatility {value} below floor {floor}")]
    Ellipticity { value: f64, floor: f64 },

    #[error("eigen-solver failed: {0}")]
    Convergence(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("expectation not stably estimated: {0}")]
    Integrability(String),

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
