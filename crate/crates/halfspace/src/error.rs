//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("principal square root of {what} has non-positive real part at lambda = {lambda}")]
    BranchViolation { what: &'static str, lambda: String },
    #[error("coupling beta is zero; the degeneracy point does not exist")]
    BetaZero,
    #[error("lambda = {lambda} lies within the degeneracy threshold of eta = {eta}")]
    DegenerateLambda { lambda: String, eta: f64 },
    #[error("amplitude system is numerically singular (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },
    #[error("scan value {value:e} fell below floor {floor:e} at {location}")]
    FloorViolated { value: f64, floor: f64, location: String },
    #[error("constant for `{symbol}` grew from {coarse:e} to {fine:e} under refinement")]
    UnstableConstant { symbol: String, coarse: f64, fine: f64 },
    #[error("whole-space symbol vanished at frequency {0:?}")]
    SymbolVanished(Vec<f64>),
    #[error("contour point {lambda} is outside the sector")]
    ContourTooLow { lambda: String },
    #[error("Picard iteration did not contract; ratios {ratios:?}")]
    NoContraction { ratios: Vec<f64> },
    #[error("finite-difference matrix is singular at row {row}")]
    SingularDiscretization { row: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
