use thiserror::Error;

/// Errors raised by the geometry engine.
///
/// Check failures (a residual above tolerance) are not errors; they are
/// reported through [`crate::report::VerificationReport`].
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain: {reason}")]
    Domain { point: Vec<[f64; 2]>, reason: String },

    #[error("point {point:?} lies within the guard zone of a puncture ({puncture})")]
    Guard { point: Vec<[f64; 2]>, puncture: String },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<[f64; 2]> },

    #[error("non-finite value while evaluating at {point:?}")]
    NonFinite { point: Vec<[f64; 2]> },

    #[error("{what} did not converge (residual {residual:.3e})")]
    NoConvergence { what: String, residual: f64 },

    #[error("trajectory left the domain at {point:?}")]
    PathExitsDomain { point: Vec<[f64; 2]> },

    #[error("segment could not be continued after {depth} subdivisions")]
    StepTooLarge { depth: usize },

    #[error("frame is not a complex-linear isometry (deviation {deviation:.3e})")]
    InvalidFrame { deviation: f64 },

    #[error("metric fails the space-form check at the base point (residual {residual:.3e})")]
    NotSpaceForm { residual: f64 },

    #[error("syntax error at line {line}, column {column}: expected {}", expected.join(" | "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
    },

    #[error("type error at column {column}: {message}")]
    Type { column: usize, message: String },

    #[error("evaluation error at {point:?}: {message}")]
    Eval { point: Vec<[f64; 2]>, message: String },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("samples unreachable from the base point: {0:?}")]
    UnreachableSamples(Vec<usize>),

    #[error("boundary data is not holomorphic: negative-frequency mass {mass:.3e} exceeds {tolerance:.3e}")]
    NotHolomorphic { mass: f64, tolerance: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("chart failure: {0}")]
    ChartFailure(String),

    #[error("puncture: {0}")]
    Puncture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Render a complex point as `[re, im]` pairs for error payloads.
pub(crate) fn pairs(z: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}
