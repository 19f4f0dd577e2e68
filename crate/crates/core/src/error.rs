use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter combination outside the admissible range.
    InvalidParams(String),
    /// A grid that cannot carry the requested computation.
    InvalidGrid(String),
    /// A sampled field contains NaN or infinity.
    NonFinite { what: &'static str, index: usize },
    /// A field or scalar input that is zero, negative or otherwise unusable.
    InvalidInput(String),
    /// An iteration failed to reach its tolerance.
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },
    /// Singular or numerically singular linear system.
    Singular { what: &'static str, detail: f64 },
    /// Shooting could not bracket the decaying solution.
    Bracket(String),
    /// The decomposition left the neighbourhood of the soliton manifold.
    TubeExit { distance: f64, radius: f64 },
    /// A conserved quantity drifted beyond its budget.
    Conservation { quantity: &'static str, drift: f64, budget: f64 },
    /// A required precondition on a previous stage is missing.
    Missing(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::NonFinite { what, index } => {
                write!(f, "non-finite sample in {what} at index {index}")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NoConvergence { what, iterations, residual } => write!(
                f,
                "{what} did not converge after {iterations} iterations (last residual {residual:e})"
            ),
            Error::Singular { what, detail } => {
                write!(f, "singular system in {what} (pivot/condition {detail:e})")
            }
            Error::Bracket(msg) => write!(f, "bracket failure: {msg}"),
            Error::TubeExit { distance, radius } => write!(
                f,
                "field left the soliton tube: H1 distance {distance:e} >= radius {radius:e}"
            ),
            Error::Conservation { quantity, drift, budget } => {
                write!(f, "{quantity} drift {drift:e} exceeds budget {budget:e}")
            }
            Error::Missing(what) => write!(f, "missing {what}"),
        }
    }
}

impl core::error::Error for Error {}
