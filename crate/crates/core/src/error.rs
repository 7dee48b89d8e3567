use thiserror::Error;

use crate::domain::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter `{field}` must be {requirement}, got {value}")]
    Validation {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("beta = {0} is outside the degenerate-conductivity regime (beta > 0); set the beta-zero override for classical runs")]
    Regime(f64),

    #[error("initial data construction failed: {0}")]
    Construction(String),

    #[error("table format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("configuration error at line {line}, key `{key}`: {msg}")]
    Config {
        line: usize,
        key: String,
        msg: String,
    },

    #[error("x - ln x = {0} has no roots (minimum value is 1)")]
    NoRoots(f64),

    #[error("insufficient data for fit: {usable} usable samples ({excluded} at or below floor)")]
    InsufficientData { usable: usize, excluded: usize },

    #[error("simulation failed at t = {t}: {msg}")]
    SimulationFailure {
        t: f64,
        msg: String,
        last_good: Box<State>,
    },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
