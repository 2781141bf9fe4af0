use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch")]
    GridMismatch,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel support too wide for grid ({needed} weights, cap {cap})")]
    KernelSupportTooWide { needed: usize, cap: usize },

    #[error("kernel weights built for dx = {weights_dx}, function has dx = {grid_dx}")]
    SpacingMismatch { weights_dx: f64, grid_dx: f64 },

    #[error("invalid velocity: {0}")]
    InvalidVelocity(String),

    #[error("invalid entropy: {0}")]
    InvalidEntropy(String),

    #[error("state out of range: {0}")]
    StateOutOfRange(f64),

    #[error("time step too large: dt = {dt}, CFL limit = {limit}")]
    TimeStepTooLarge { dt: f64, limit: f64 },

    #[error("maximum principle violated: value {value} at cell {index}")]
    MaximumPrincipleViolated { index: usize, value: f64 },

    #[error("kernel mismatch: expected {expected}, found {found}")]
    KernelMismatch { expected: String, found: String },

    #[error("velocity mismatch: expected {expected}, found {found}")]
    VelocityMismatch { expected: String, found: String },

    #[error("non-positive values for log fit at epsilon = {0:?}")]
    NonPositiveValues(Vec<f64>),

    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative entry {value} at index {index} in profile")]
    NegativeProfile { index: usize, value: f64 },

    #[error("map is not strictly increasing on the sampled range (at {0})")]
    NonMonotoneMap(f64),

    #[error("infeasible mass {mass}: must lie in [0, {max}]")]
    InfeasibleMass { mass: f64, max: f64 },

    #[error("scenario validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
