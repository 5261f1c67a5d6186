use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum DsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("field is in {found:?} space, expected {expected:?}")]
    WrongSpace {
        expected: crate::spectral::Space,
        found: crate::spectral::Space,
    },

    #[error("order {order} outside supported range {min}..={max}")]
    OrderOutOfRange {
        order: usize,
        min: usize,
        max: usize,
    },

    #[error("taylor order mismatch: moments carry {moments}, tables carry {tables}")]
    TaylorOrderMismatch { moments: usize, tables: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("solution blew up at t = {time}: max |u| = {max_abs:e}")]
    BlowUp { time: f64, max_abs: f64 },

    #[error("invalid Riemann matrix: {0}")]
    InvalidRiemannMatrix(String),

    #[error("theta denominator vanishes at ({x}, {y}, t = {t})")]
    SingularTheta { x: f64, y: f64, t: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DsError> = std::result::Result<T, E>;
