use thiserror::Error;

/// Errors raised by the configuration, toppling, simulation, exact and
/// series layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SandpileError {
    #[error("site {site} is outside the window [{lo}, {hi}] and cannot be resolved from the tail")]
    InsufficientWindow { site: i64, lo: i64, hi: i64 },

    #[error("height {0} is not 1 or 2")]
    InvalidHeight(u64),

    #[error("invalid site {site}: {reason}")]
    InvalidSite { site: i64, reason: String },

    #[error("configurations are not ordered: lower exceeds upper at site {site}")]
    NotOrdered { site: i64 },

    #[error("invalid grain field: {0}")]
    InvalidGrainField(String),

    #[error("configuration has infinitely many critical sites")]
    NotFinite,

    #[error("volume n = {n} exceeds the cap {cap}")]
    SizeLimit { n: u32, cap: u32 },

    #[error("t = {t} is not below the convergence radius {radius}")]
    RadiusExceeded { t: f64, radius: f64 },

    #[error("series needs {required} generator iterates but the depth cap is {cap}")]
    DepthLimit { required: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SandpileError>;
