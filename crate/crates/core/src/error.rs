#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("coefficient violation: {0}")]
    Coefficient(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("spectral failure: {0}")]
    Spectral(String),
    #[error("resolvent singular at lambda = {re} + {im}i")]
    Singular { re: f64, im: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("time ordering violated: t = {t} precedes s = {s}")]
    Ordering { s: f64, t: f64 },
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid lag: {0}")]
    Lag(String),
    #[error("statistics: {0}")]
    Statistics(String),
    /// A structural hypothesis such as (F1) or (G1) fails.
    #[error("hypothesis {condition} violated: {detail}")]
    Hypothesis {
        condition: &'static str,
        detail: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
