use thiserror::Error;

pub type Result<T> = std::result::Result<T, HybridError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HybridError {
    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid is not aligned with the system: {0}")]
    GridNotAligned(String),

    #[error("fields live on different grids ({left} vs {right} cells)")]
    GridMismatch { left: usize, right: usize },

    #[error("trajectory from x0 = {x0} reaches the guard at t = {crossing_time} before t = {t}")]
    GuardCrossed { x0: f64, t: f64, crossing_time: f64 },

    #[error("only {cells} cells carry mass above 1e-15; need at least 3")]
    DegenerateSupport { cells: usize },

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("linear solve failed at row {row}")]
    LinearSolveFailure { row: usize },
}
