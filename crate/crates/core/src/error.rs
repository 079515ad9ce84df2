use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("variable x{index} used but dimension is {dim}")]
    DimensionMismatch { index: usize, dim: usize },

    #[error("expected a point of dimension {expected}, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("{op} is undefined at {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("point {point:?} is outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("radius {r} outside the admissible range ({r_min}, {a})")]
    RadiusOutOfRange { r: f64, r_min: f64, a: f64 },

    #[error("hessian is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotStronglyConvex { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("radial metric positivity violated at r = {r}: f = {f}, h = {h}")]
    MetricPositivity { r: f64, f: f64, h: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("geodesic left the domain at s = {s}")]
    LeftDomain { s: f64 },

    #[error("energy drift {drift:e} exceeds the allowed {limit:e}")]
    DriftExceeded { drift: f64, limit: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}
