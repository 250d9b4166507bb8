use thiserror::Error;

use crate::info::CapacityResult;

/// Errors raised by the library. Validation errors name the violated
/// invariant and how far off the input was.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |a_ij - conj(a_ji)| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is not 1: got {trace}")]
    BadTrace { trace: f64 },

    #[error("state vector is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("probabilities are invalid: {0}")]
    BadProbabilities(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds max_dim = {max_dim}")]
    DimOverflow { dim: usize, max_dim: usize },

    #[error("decision rule is not a sub-resolution of identity: min eigenvalue of I - sum X_j = {min_eigenvalue:e}")]
    NotPovm { min_eigenvalue: f64 },

    #[error("decision rule has {found} elements, codebook needs at least {needed}")]
    TooFewElements { needed: usize, found: usize },

    #[error("operation requires pure states")]
    MixedStates,

    #[error("states do not commute: commutator norm = {norm:e}")]
    NotCommuting { norm: f64 },

    #[error("channel has no cost function")]
    NoCost,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("optimizer did not converge after {} iterations (gap {:e})", .best.iterations, .best.gap)]
    NoConvergence { best: Box<CapacityResult> },

    #[error("no convergence: {0}")]
    NoConvergenceScalar(String),

    #[error("could not bracket the water level: {0}")]
    NoBracket(String),

    #[error("quadrature failed to reach tolerance (error estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },
}

impl Error {
    /// True for errors caused by the numerics rather than by the input.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NoConvergenceScalar(_)
                | Error::NoBracket(_)
                | Error::QuadratureFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
