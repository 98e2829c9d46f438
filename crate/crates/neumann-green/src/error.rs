//! Error type shared by all modules.

use std::fmt;

/// Witness for a failed ellipticity check: the sample point and frame pair
/// at which one of the two quadratic-form inequalities broke.
#[derive(Debug, Clone)]
pub struct EllipticityWitness {
    pub x: [f64; 2],
    pub t: f64,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub rayleigh: f64,
    pub bilinear: f64,
}

#[derive(Debug)]
pub enum Error {
    /// A precondition on constructor or operation arguments failed.
    InvalidInput(String),
    /// The coefficient tensor violated the declared ellipticity constant.
    EllipticityViolation(Box<EllipticityWitness>),
    /// Discrete coercivity fell below the declared constant; carries the witness vector.
    CoercivityViolation { ratio: f64, witness: Vec<f64> },
    /// Sparse solve did not reach the requested relative residual.
    LinearSolveFailure { residual: f64, iterations: usize },
    /// Mollifier radius below the 2h resolvability floor.
    MollifierUnresolvable { eps: f64, h: f64 },
    /// The discrete mass identity for a Green table broke beyond tolerance.
    ConservationViolation { step: usize, deviation: f64 },
    /// Two tables were paired on incompatible meshes or time grids.
    GridMismatch(String),
    /// Evaluation time past the tabulated horizon.
    OutOfWindow { t: f64, horizon: f64 },
    /// An admissible sample region was empty.
    NoValidSamples(String),
    /// A slope or constant fit could not be performed on the available data.
    FitFailure(String),
    /// A weight function exceeded its certified Lipschitz constant on some edge.
    LipschitzViolation { slope: f64, bound: f64 },
    /// Eigenvalue iteration failed to converge.
    EigenFailure { iterations: usize, residual: f64 },
    /// Analytic tail of the time integral exceeded the allowed share of the result.
    TailTooLarge { tail: f64, magnitude: f64 },
    /// Experiment configuration problem, with the offending line number when known.
    Config { line: Option<usize>, message: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::EllipticityViolation(w) => write!(
                f,
                "ellipticity violation at x=({}, {}), t={}: rayleigh={}, bilinear={}",
                w.x[0], w.x[1], w.t, w.rayleigh, w.bilinear
            ),
            Error::CoercivityViolation { ratio, .. } => {
                write!(f, "coercivity violation: ratio {ratio} below declared constant")
            }
            Error::LinearSolveFailure { residual, iterations } => write!(
                f,
                "linear solve stalled at relative residual {residual} after {iterations} iterations"
            ),
            Error::MollifierUnresolvable { eps, h } => {
                write!(f, "mollifier radius {eps} below resolvability floor 2h = {}", 2.0 * h)
            }
            Error::ConservationViolation { step, deviation } => write!(
                f,
                "mass conservation identity violated at step {step}: deviation {deviation}"
            ),
            Error::GridMismatch(m) => write!(f, "grid mismatch: {m}"),
            Error::OutOfWindow { t, horizon } => {
                write!(f, "evaluation time {t} past tabulated horizon {horizon}")
            }
            Error::NoValidSamples(m) => write!(f, "no valid samples: {m}"),
            Error::FitFailure(m) => write!(f, "fit failure: {m}"),
            Error::LipschitzViolation { slope, bound } => {
                write!(f, "edge slope {slope} exceeds certified Lipschitz bound {bound}")
            }
            Error::EigenFailure { iterations, residual } => {
                write!(f, "eigen iteration did not converge in {iterations} steps (residual {residual})")
            }
            Error::TailTooLarge { tail, magnitude } => {
                write!(f, "time-integral tail {tail} too large for result magnitude {magnitude}")
            }
            Error::Config { line: Some(l), message } => write!(f, "config error (line {l}): {message}"),
            Error::Config { line: None, message } => write!(f, "config error: {message}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
