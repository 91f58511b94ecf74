use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid box size {0}: half-width must be at least 1")]
    InvalidBoxSize(i64),

    #[error("invalid rectangle {width}x{height}")]
    InvalidRectangle { width: i64, height: i64 },

    #[error("geometry has no half-width; operation needs a centred square box")]
    NotASquareBox,

    #[error("invalid strip parameter k={k} for half-width N={n} (need 1 <= k <= N)")]
    InvalidStripParameter { k: i64, n: i64 },

    #[error("invalid side index {0} (expected 1..=4)")]
    InvalidSide(u8),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("empty site set")]
    EmptySiteSet,

    #[error("configuration does not match geometry: expected {expected} entries, got {got}")]
    GeometryMismatch { expected: usize, got: usize },

    #[error("box with {sites} sites exceeds the enumeration cap of {cap}")]
    TooLargeForEnumeration { sites: usize, cap: usize },

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bond configuration violates the site boundary condition: {0}")]
    BoundaryConflict(String),

    #[error("test function has zero variance")]
    ZeroVariance,

    #[error("degenerate event: probability {0} is 0 or 1")]
    DegenerateEvent(f64),

    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("too few batches: {got} (need at least {need})")]
    TooFewBatches { got: usize, need: usize },

    #[error("zero-hit connectivity estimate at n={0}")]
    ZeroHits(u32),

    #[error("displacement too close to the box boundary: {0}")]
    NearBoundary(String),

    #[error("inadmissible point: {0}")]
    Inadmissible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
