use thiserror::Error;

/// Errors raised by the numerical layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular Green kernel: sensor {sensor} coincides with grid point {point}")]
    SingularKernel { sensor: usize, point: usize },
    #[error("Foldy-Lax system near resonance (condition number {condition:.3e})")]
    Resonance { condition: f64 },
    #[error("spline transform vanishes at sampling pair (k={k}, l={l})")]
    Deconvolution { k: usize, l: usize },
    #[error("no singular value gap exceeds {tol:e}; spectrum: {spectrum:?}")]
    AmbiguousRank { tol: f64, spectrum: Vec<f64> },
    #[error("noise subspace is empty (rank estimate {rank} equals row count)")]
    EmptyNoiseSpace { rank: usize },
    #[error("threshold is infinite: {0}")]
    InfiniteThreshold(String),
    #[error("ill-conditioned restriction (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("zero column {0}")]
    ZeroColumn(usize),
    #[error("subset enumeration of {count} exceeds cap {cap}; use the set-restricted or coherence-bound estimate")]
    EnumerationCap { count: u128, cap: u128 },
    #[error("bound is vacuous: {0}")]
    VacuousBound(String),
    #[error("rank collapse: expected rank {expected}, numerical rank {found}")]
    RankCollapse { expected: usize, found: usize },
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
