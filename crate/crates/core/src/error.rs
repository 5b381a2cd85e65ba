use crate::forward::Solution;

/// Errors raised by the numerical modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field lives on a different mesh")]
    MeshMismatch,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("vanishing gradient on element {element} (|grad| = {magnitude:e})")]
    DegenerateGradient { element: usize, magnitude: f64 },

    #[error("coefficient matrix is not positive definite on element {element} (min eigenvalue {min_eigenvalue:e})")]
    NotElliptic { element: usize, min_eigenvalue: f64 },

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("nonlinear solver did not converge after {} iterations (relative residual {:e})", .last.iterations, .last.residual)]
    NotConverged { last: Box<Solution> },

    #[error("boundary data not ordered: f1 < f2 at boundary node {node}")]
    Ordering { node: usize },

    #[error("critical point along the probe family: min |grad| = {min_gradient:e}")]
    CriticalPoint { min_gradient: f64 },

    #[error("incomplete frequency lattice, missing {missing:?}")]
    IncompleteLattice { missing: Vec<(i32, i32)> },
}

pub type Result<T> = std::result::Result<T, Error>;
