use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile has an odd component of size {0:.3e}")]
    OddComponent(f64),

    #[error("max_degree {max_degree} too small: reconstruction residual {residual:.3e}")]
    DegreeTooSmall { max_degree: usize, residual: f64 },

    #[error("non-finite integrand at quadrature node {0}")]
    NonFiniteIntegrand(usize),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("profile outside the admissible class: {0}")]
    Hypothesis(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue collapse: ratio {ratio:.3e} below threshold")]
    EigenvalueCollapse { ratio: f64 },

    #[error("continuation trace violates the dimension bound: {0}")]
    TheoryViolation(String),

    #[error("continuation trace inconclusive: {0}")]
    Inconclusive(String),

    #[error("refinement did not converge: {0}")]
    Refinement(String),

    #[error("energy of {0} is infinite")]
    InfiniteEnergy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
