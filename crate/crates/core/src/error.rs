use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<f64>),

    #[error("dimension n = {n} out of range for m = {m} (need 2 <= n <= 2m+1)")]
    DimensionOutOfRange { m: u32, n: u32 },

    #[error("evaluation at the singular point x = 0")]
    SingularPoint,

    #[error("coincident points: x = y")]
    CoincidentPoints,

    #[error("bound spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("grid too large: {0}")]
    GridTooLarge(String),

    #[error("sparse factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("linear solver did not reach the residual target (relative residual {residual:.3e})")]
    SolverDiverged { residual: f64 },

    #[error("point {point:?} is too close to the boundary (d = {distance:.4e}, need >= {required:.4e})")]
    TooCloseToBoundary {
        point: Vec<f64>,
        distance: f64,
        required: f64,
    },

    #[error("field vanishes identically; ratio undefined")]
    ZeroField,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parity: {0}")]
    InvalidParity(String),

    #[error("infeasible geometry: {0}")]
    GeometryInfeasible(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
