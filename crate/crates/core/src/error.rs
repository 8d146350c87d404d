use thiserror::Error;

/// Errors raised by the solver core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element index {index} out of range (mesh has {count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("invalid equation-of-state parameters: {0}")]
    InvalidEos(String),

    /// Density is not strictly positive where the model requires it.
    #[error("non-positive density {value:e} at {location}")]
    Positivity { value: f64, location: Location },

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("matrix patterns differ")]
    PatternMismatch,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualNotAccepted { residual: f64, tolerance: f64 },

    #[error("Newton iteration diverged at iteration {iteration}: residual {residual:e} grew past {limit:e}")]
    NewtonDiverged {
        iteration: usize,
        residual: f64,
        limit: f64,
    },

    #[error("Newton iteration did not converge in {iterations} iterations (last relative error {last:e})")]
    NewtonNotConverged { iterations: usize, last: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    /// Wraps a failure with the step index and time at which it occurred.
    #[error("step {step} (t = {time}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

/// Where a positivity violation was detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Node(usize),
    QuadraturePoint { element: usize, point: usize },
    Value,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Node(i) => write!(f, "node {i}"),
            Location::QuadraturePoint { element, point } => {
                write!(f, "quadrature point {point} of element {element}")
            }
            Location::Value => write!(f, "scalar argument"),
        }
    }
}

impl Error {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Self {
        Error::AtStep {
            step,
            time,
            source: Box::new(self),
        }
    }

    /// Attach an element/point location to a bare positivity error.
    pub(crate) fn at_quadrature_point(self, element: usize, point: usize) -> Self {
        match self {
            Error::Positivity {
                value,
                location: Location::Value,
            } => Error::Positivity {
                value,
                location: Location::QuadraturePoint { element, point },
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
