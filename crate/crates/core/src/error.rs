use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoaError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("frequency index {0} is not in the configured frequency set")]
    InvalidFrequency(usize),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("constraint set is rank deficient (component pivot {pivot:.3e})")]
    RankDeficient { pivot: f64 },

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("noise subspace would be empty: K = {k}, dimension = {dim}")]
    SubspaceDimension { k: usize, dim: usize },

    #[error("found only {found} local minima of the null spectrum, {wanted} requested")]
    DegenerateSpectrum { wanted: usize, found: usize, minima: Vec<f64> },

    #[error("matrix is indefinite (min eigenvalue {min_eig:.3e})")]
    Indefinite { min_eig: f64 },

    #[error("matrix is numerically full rank; no null space to decompose")]
    FullRank,

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DoaError>;

impl From<std::io::Error> for DoaError {
    fn from(e: std::io::Error) -> Self {
        DoaError::Io(e.to_string())
    }
}
