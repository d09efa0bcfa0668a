use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Hamiltonian has imaginary-axis eigenvalues, the stable subspace has
    /// the wrong dimension, or its top block is singular. Usually means the
    /// attenuation level is below what the plant can achieve.
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("Riccati solution is not positive semi-definite (min eigenvalue {min_eig:e})")]
    IndefiniteSolution { min_eig: f64 },

    #[error("system is not Hurwitz (max real part {max_real:e})")]
    UnstableSystem { max_real: f64 },

    #[error("gamma bracket invalid: upper bound {upper} is infeasible")]
    BracketInvalid { upper: f64 },

    #[error("closed loop A - BK is unstable (max real part {max_real:e})")]
    ClosedLoopUnstable { max_real: f64 },

    #[error("step {dt:e} s exceeds the limit {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("derivative is not finite at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error("controller synthesis failed: {0}")]
    SynthesisFailed(Box<Error>),

    #[error("simulation diverged at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("parse error: {0}")]
    Parse(String),
}
