use thiserror::Error;

/// Errors produced by parameter validation, parsing, and the measure/moment
/// operations. Everything user-facing funnels through this one enum so the
/// CLI can map library failures onto a single exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: u64 },

    #[error("bit string length {len} is not a multiple of the symbol width {k}")]
    LengthNotMultiple { len: usize, k: u32 },

    #[error("strings have unequal lengths {a} and {b}")]
    UnequalLengths { a: usize, b: usize },

    #[error("string of length {len} exceeds measure depth {depth}")]
    DepthExceeded { len: usize, depth: usize },

    #[error("measure file rejected: {0}")]
    MeasureFormat(String),

    #[error("tree file rejected: {0}")]
    TreeFormat(String),

    #[error("witness rejected: {0}")]
    WitnessFormat(String),

    #[error("witness strings do not form a chain: {0}")]
    WitnessNotChain(String),

    #[error("witness has no string of symbol length {0}")]
    WitnessMissingLength(usize),

    #[error("sampling with membership probability 1 is degenerate; use the full-tree constructor instead")]
    DegenerateSampling,

    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),

    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
