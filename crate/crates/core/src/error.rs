use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = GafError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GafError {
    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailure(String),

    #[error("disc mass never reaches 1 around {z} (searched up to radius {r_max:e})")]
    NoBracket { z: Complex64, r_max: f64 },

    #[error("disc D({z}, {r:e}) carries zero mass")]
    DivisionByZeroMass { z: Complex64, r: f64 },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("operation not supported for weight `{weight}`: {reason}")]
    UnsupportedWeight { weight: String, reason: String },

    #[error("truncation needs more than {cap} basis terms")]
    TruncationBudgetExceeded { cap: usize },

    #[error("point {z} lies outside the certified disc of radius {radius}")]
    OutOfCertifiedDomain { z: Complex64, radius: f64 },

    #[error("sampling sequence still uncovered after {rounds} densification rounds")]
    CoverageFailure { rounds: usize },

    #[error("experiment region is not inside the padded generation window")]
    RegionNotPadded,

    #[error("intensity is unbounded on the requested region")]
    UnboundedDensity,

    #[error("zero suspected on the contour (radius {radius:e}) after {attempts} attempts")]
    BoundaryZeroSuspected { radius: f64, attempts: usize },

    #[error("Newton refinement failed near {near}")]
    NewtonDivergence { near: Complex64 },

    #[error("multiple zero suspected near {near}")]
    MultipleZero { near: Complex64 },

    #[error("test function support escapes the zero-set region")]
    SupportEscapesRegion,

    #[error("measure is not locally flat on the region (band width {band:.3} > {limit})")]
    NotLocallyFlat { band: f64, limit: f64 },

    #[error("{flagged} of {trials} trials flagged at L = {l}")]
    TooManyFlagged { flagged: usize, trials: usize, l: f64 },

    #[error("no L value left with enough events to fit ({0})")]
    InsufficientEvents(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GafError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        GafError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
