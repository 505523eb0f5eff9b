//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("array length {got} does not match grid cell count {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed field file at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum NonlinearityError {
    #[error("unknown nonlinearity '{0}'")]
    Unknown(String),
    #[error("invalid parameters for '{name}': {message}")]
    InvalidParams { name: String, message: String },
    #[error(
        "gradient inconsistent with potential at {point:?}: residual {residual:.3e} > tol {tol:.3e}"
    )]
    ConsistencyViolation {
        point: Vec<f64>,
        residual: f64,
        tol: f64,
    },
}

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no sign change bracketed: {context}; scanned values {scanned:?}")]
    NotBracketed { context: String, scanned: Vec<f64> },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initialization never reached positive potential mass (last amplitude {0})")]
    NoPositiveV(f64),
    #[error("iteration diverged: {0}")]
    Diverged(String),
    #[error("iterate collapsed below the norm floor {floor:.3e}")]
    CollapsedToZero { floor: f64 },
    #[error("degenerate denominator in multiplier estimate")]
    DegenerateDenominator,
    #[error("problem spec invalid: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("shooting step failed at r = {r}: {message}")]
    StepFailure { r: f64, message: String },
    #[error("bracket invalid: both endpoints classify as {0}")]
    BracketInvalid(String),
    #[error("no ground state found within tolerance (bracket [{lo}, {hi}])")]
    NoGroundState { lo: f64, hi: f64 },
    #[error("oracle requires m = 1, got m = {0}")]
    NotScalar(usize),
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("check '{check}' requires m = 1, got m = {m}")]
    NotScalar { check: &'static str, m: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
}
