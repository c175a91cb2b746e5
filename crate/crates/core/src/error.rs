use thiserror::Error;

/// Errors raised by the geometry, flow, singularity and reduced-volume layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// Input failed a structural or range check.
    #[error("validation error: {0}")]
    Validation(String),

    /// Frame metric is not (numerically) positive-definite.
    #[error("degenerate metric: smallest eigenvalue {min_eig:e} vs largest {max_eig:e}")]
    Degenerate { min_eig: f64, max_eig: f64 },

    /// Quantity undefined at this state (e.g. f_sigma with R <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation precondition does not hold for the supplied data.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Not enough dynamic range or samples to decide.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Requested time or radius lies outside the stored window.
    #[error("outside window: {0}")]
    OutOfWindow(String),

    /// ODE integration failed.
    #[error("integration failure: {0}")]
    Integration(String),

    /// Quadrature did not reach the requested accuracy.
    #[error("quadrature did not converge (achieved error {achieved:e}, requested {requested:e})")]
    Quadrature { achieved: f64, requested: f64 },

    /// Boundary-value solve did not find an initial vector.
    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
