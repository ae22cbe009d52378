use thiserror::Error;

use crate::evolve::TrajectoryRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-positive concentration c = {value:e} at node (i = {i}, j = {j})")]
    NonPositiveConcentration { i: usize, j: usize, value: f64 },

    #[error("q is not a gradient: max |curl q| = {max_curl:.3e} exceeds {limit:.3e}")]
    NotCurlFree { max_curl: f64, limit: f64 },

    #[error("wave construction failed: {0}")]
    WaveConstruction(String),

    #[error("integrator blowup at t = {t}: {reason}")]
    Blowup {
        t: f64,
        reason: String,
        /// Everything recorded before the blowup was detected.
        partial: Option<Box<TrajectoryRecord>>,
    },

    #[error("decay fit: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
