use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{what} has a non-finite value at point {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("position {position:?} lies outside the grid domain")]
    OutsideGrid { position: Vec<f64> },

    #[error("negative density {value} at point {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density integrates to {total}, expected 1 within {tolerance}")]
    Unnormalized { total: f64, tolerance: f64 },

    #[error("wave function has a node at point {index} (|psi|^2 = {density})")]
    Node { index: usize, density: f64 },

    #[error("phase increments too coarse: winding residual {residual} exceeds 0.1")]
    CoarsePhase { residual: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("rescale factor must be non-zero")]
    ZeroRescale,

    #[error("time step {dt} exceeds the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },

    #[error("field evolution blew up at step {step}: {detail}")]
    Blowup { step: u64, detail: String },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    SolverResidual { residual: f64, tolerance: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration rejected: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<crate::scenario::ConfigIssue>),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
