use thiserror::Error;

use crate::stages::DeficitReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mollification length {l} exceeds grid pad {pad}")]
    MollifierExceedsPad { l: f64, pad: f64 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("mode misuse: {0}")]
    ModeMisuse(String),

    #[error(
        "no admissible frame after {retries} retries (best condition number {best_condition:.3e})"
    )]
    NoAdmissibleFrame { retries: usize, best_condition: f64 },

    #[error("outside sigma_star ball: |D - Id| = {distance:.6e} > sigma_star = {sigma_star:.6e}")]
    OutsideSigmaStarBall { distance: f64, sigma_star: f64 },

    #[error("unsupported derivative order: d_s^{ds} d_t^{dt}")]
    DerivativeOrder { ds: usize, dt: usize },

    #[error("frequency exceeds grid: mu = {mu:.6e} needs h * mu * {points_per_period} <= 1 but h = {h:.6e}")]
    FrequencyExceedsGrid {
        mu: f64,
        h: f64,
        points_per_period: usize,
    },

    #[error("schedule violates the ledger: {0}")]
    Infeasible(String),

    #[error("schedule exceeds float range: {0}")]
    ScheduleOverflow(String),

    #[error("stage {} assertion failed: {}", .0.q, .0.failure_summary())]
    StageAssertion(Box<DeficitReport>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("test function support touches the boundary: {0}")]
    SupportTouchesBoundary(String),

    #[error("config line {line}: key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("malformed CIGRID data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
