use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Newton iteration for Gauss-Legendre root {index} of order {order} did not converge")]
    NewtonNonConvergence { order: usize, index: usize },

    #[error("quadrature not converged: {coarse:e} vs {refined:e} (log-magnitudes), relative discrepancy {discrepancy:e}")]
    QuadratureNotConverged {
        coarse: f64,
        refined: f64,
        discrepancy: f64,
    },

    #[error("insufficient data: {usable} usable points, need at least 3")]
    InsufficientData { usable: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("factors disagree on N: {0:?}")]
    MismatchedN(Vec<u32>),

    #[error("Gram matrix not positive definite (smallest eigenvalue {smallest_eigenvalue:e})")]
    NotPositiveDefinite { smallest_eigenvalue: f64 },

    #[error("series cutoff insufficient: {0}")]
    CutoffInsufficient(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NewtonNonConvergence { .. }
                | Error::QuadratureNotConverged { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::CutoffInsufficient(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
