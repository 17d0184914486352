use std::path::PathBuf;

/// Errors raised by the simulation and mitigation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n_sites} sites exceed the dense-matrix limit of {limit}")]
    TooManySites { n_sites: usize, limit: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("levels {alpha} and {other} are degenerate at l0 = {l0} (gap {gap:e})")]
    Degenerate {
        l0: f64,
        alpha: usize,
        other: usize,
        gap: f64,
    },

    #[error("level tracking is ambiguous at l0 = {l0}: best overlap {overlap:.3} for level {alpha}")]
    TrackingAmbiguous { l0: f64, alpha: usize, overlap: f64 },

    #[error("time {t} lies outside the ramp [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("empty Pauli sum cannot be compiled")]
    EmptySum,

    #[error("noise factor {0} must be odd and positive")]
    InvalidFoldFactor(usize),

    #[error("least-squares system underdetermined: {points} points for {unknowns} unknowns")]
    Underdetermined { points: usize, unknowns: usize },

    #[error("no eta coefficients for level {alpha} at time point {i}")]
    MissingEtas { alpha: usize, i: usize },

    #[error("lines are misaligned: {0}")]
    Misaligned(String),

    #[error("region `{0}` contains no time points")]
    EmptyRegion(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed record: {reason}")]
    Parse { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
