use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants are grouped by the exit code the CLI maps them to: configuration
/// problems, data/parse problems and numeric failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid almanac record (PRN {prn}): {msg}")]
    InvalidRecord { prn: u32, msg: String },

    #[error("kepler solver did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },

    #[error("destructive interference: composite amplitude {0:.4} below guard")]
    DestructiveInterference(f64),

    #[error("epoch has no visible satellites")]
    EmptyEpoch,

    #[error("satellite {sat}: carrier-phase ambiguity unresolvable (coarse cosine {coarse:.3})")]
    UnresolvableAmbiguity { sat: usize, coarse: f64 },

    #[error("insufficient satellites: need {needed}, have {available}")]
    InsufficientSatellites { needed: usize, available: usize },

    #[error("ill-conditioned geometry (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("least squares did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last_position: [f64; 3],
        last_clock: f64,
    },

    #[error("combinatorial blow-up: {subsets} subsets exceeds guard of {guard}")]
    CombinatorialBlowup { subsets: u64, guard: u64 },

    #[error("invalid time step {0} s")]
    InvalidStep(f64),

    #[error("innovation covariance is singular")]
    SingularUpdate,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("timestamps not strictly increasing at record {0}")]
    Ordering(usize),

    #[error("empty stream: {0}")]
    EmptyStream(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code: 1 configuration, 2 data or parse, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGeometry(_) => 1,
            Error::Parse { .. }
            | Error::InvalidRecord { .. }
            | Error::Schema(_)
            | Error::Ordering(_)
            | Error::EmptyStream(_)
            | Error::Scenario(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
