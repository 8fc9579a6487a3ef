use crate::searchspace::Architecture;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("layer index out of bounds: {index} (total layers {total})")]
    LayerOutOfBounds { index: usize, total: usize },

    #[error("space too large to enumerate: {size} architectures exceeds cap {cap}")]
    TooLargeToEnumerate { size: String, cap: u64 },

    #[error("architecture does not fit landscape space: {0}")]
    ArchitectureMismatch(Architecture),

    #[error("invalid architecture string {0:?}")]
    ParseArchitecture(String),

    #[error("unknown landscape kind {0:?}")]
    UnknownLandscapeKind(String),

    #[error("invalid landscape: {0}")]
    InvalidLandscape(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("incomplete accumulation window: {done} of {window} micro-steps accumulated")]
    IncompleteWindow { done: usize, window: usize },

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty leaderboard: no completed search cycle")]
    EmptyLeaderboard,

    #[error("evaluation failed for architecture {arch}: {source}")]
    Evaluation {
        arch: Architecture,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluator error: {0}")]
    Evaluator(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
