use thiserror::Error;

/// Errors produced by the design, evaluation and codec layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid probability vector: {0}")]
    InvalidSpv(String),

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("invalid preference: {0}")]
    InvalidPreference(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every codebook assigns zero probability to a symbol used by item {item}")]
    AllInfinite { item: usize },

    #[error("cluster has zero total weight")]
    EmptyCluster,

    #[error("only {distinct} seeding candidates with positive weight for {k} centers")]
    DegenerateSupport { distinct: usize, k: usize },

    #[error("search budget exceeded: {candidates} candidates > limit {limit}")]
    BudgetExceeded { candidates: f64, limit: f64 },

    #[error("point violates the linear constraints (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("rejection sampler stalled: acceptance rate {rate:e} after {proposals} proposals")]
    RejectionStall { rate: f64, proposals: u64 },

    #[error("codebooks coincide; no partition boundary")]
    NoBoundary,

    #[error("code lengths violate the Kraft inequality (sum {sum})")]
    KraftViolation { sum: f64 },

    #[error("codeword length {0} exceeds the supported maximum")]
    CodewordTooLong(u32),

    #[error("no codebook can encode the item")]
    Unencodable,

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("stream truncated")]
    TruncatedStream,

    #[error("invalid codeword in stream")]
    InvalidCodeword,

    #[error("symbol {0} has zero probability")]
    ZeroProbabilitySymbol(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
