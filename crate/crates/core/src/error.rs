use thiserror::Error;

use num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// ζ = −i puts the single-scatterer transmission `t = 1/(1 − iζ)` on its pole.
    #[error("coupling constant {zeta} sits on the transmission pole (zeta = -i)")]
    SingularCoupling { zeta: Complex64 },

    #[error("field boundary problem is singular for positions {positions:?}")]
    SingularSystem { positions: Vec<f64> },

    #[error("positions must be strictly increasing (violated between index {index} and {})", index + 1)]
    OrderingViolation { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("closed form `{formula}` is evaluated on a pole")]
    Pole { formula: &'static str },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("eigenvalue iteration did not converge for a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("integration blew up at t = {time} (state scale {scale:e})")]
    NumericalBlowup { time: f64, scale: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
