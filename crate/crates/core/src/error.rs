use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum QiError {
    #[error("partition needs at least 3 knots (2 cells), got {0}")]
    PartitionTooShort(usize),

    #[error("knots must be finite and strictly increasing: knot {index} ({value}) does not exceed its predecessor")]
    NonIncreasingKnot { index: usize, value: f64 },

    #[error("unsupported mesh: criss-cross construction needs m, n >= 2, got m = {m}, n = {n}")]
    UnsupportedMesh { m: usize, n: usize },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("point lies outside the triangle (barycentric coordinate {0:e})")]
    OutsideTriangle(f64),

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("triangles do not share an edge")]
    NotEdgeAdjacent,

    #[error("polynomial degree {0} exceeds 2")]
    DegreeTooHigh(u32),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("index ({i}, {j}) outside 0..={imax} x 0..={jmax}")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        imax: usize,
        jmax: usize,
    },

    #[error("construction of B-spline ({i}, {j}) failed: {reason}")]
    Construction { i: usize, j: usize, reason: String },

    #[error("basis normalization failed: {0}")]
    Normalization(String),

    #[error("function returned a non-finite value {value} at ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },

    #[error("derivative D^({0},{1}) unavailable for this function")]
    DerivativeUnavailable(u8, u8),

    #[error("function lacks the smoothness metadata required by {0}")]
    MissingSmoothness(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, QiError>;
