use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants group into three families that the command-line front end maps
/// onto distinct exit codes: invalid input, infeasible state, and numerical
/// failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible (p, q, D) state: reconstructed gamete {index} = {value}")]
    InfeasibleState { index: usize, value: f64 },

    #[error("CFL violation: dt = {dt} exceeds explicit diffusion limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("field `{field}` left its admissible range at t = {time}, x = {x}: value {value}")]
    FieldOutOfRange {
        field: &'static str,
        time: f64,
        x: f64,
        value: f64,
    },

    #[error("boundary value {value} of field `{field}` is not within 1e-6 of a limit state")]
    DomainTooNarrow { field: &'static str, value: f64 },

    #[error("no level crossing found")]
    NoCrossing,

    #[error("{count} level crossings found, expected one")]
    MultipleCrossings { count: usize },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("orbit escaped at x = {x}, y = {y} before reaching x = 1/2")]
    NoHeteroclinic { x: f64, y: f64 },

    #[error("profile tail too short: {0}")]
    InsufficientTail(String),

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error("ODE integration failed at t = {t}: {reason}")]
    OdeFailure { t: f64, reason: String },

    #[error("Newton iteration diverged: last residual {residual} after {iterations} iterations")]
    NewtonDivergence { residual: f64, iterations: usize },

    #[error("eigen-iteration did not converge for shift {shift}")]
    EigenNonConvergence { shift: f64 },

    #[error("relaxation did not settle within t = {horizon}")]
    RelaxationNonConvergence { horizon: f64 },

    #[error("grid too coarse: dx = {dx}, need at most {max_dx}")]
    GridTooCoarse { dx: f64, max_dx: f64 },

    #[error("singular linear system at row {0}")]
    SingularSystem(usize),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::CflViolation { .. }
            | Error::DomainTooNarrow { .. }
            | Error::GridTooCoarse { .. } => ErrorKind::Invariant,
            Error::InfeasibleState { .. } | Error::FieldOutOfRange { .. } => ErrorKind::Invariant,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Invariant,
    Numerical,
    Io,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
