use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("compatibility violated: mean of normal boundary velocity is {mean:e} (tolerance {tol:e})")]
    Compatibility { mean: f64, tol: f64 },
    #[error("boundary data must vanish on the plate edge (max |value| = {0:e})")]
    BoundaryData(f64),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("interface sub-iteration diverged; residual history {history:?}")]
    CouplingDivergence { history: Vec<f64> },
    #[error("invalid initial data: {0}")]
    InitialData(String),
    #[error("trajectory too short: need at least {needed} snapshots, have {have}")]
    TrajectoryTooShort { needed: usize, have: usize },
    #[error("series unsuitable for fitting: {0}")]
    Fit(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
