use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("degenerate series: standard deviation is zero")]
    DegenerateSeries,
    #[error("degenerate output: zero variance over the evaluation window")]
    DegenerateOutput,
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("selection error: no positive selector entry")]
    Selection,
    #[error("undefined correlation: zero variance input")]
    UndefinedCorrelation,
    #[error("degenerate experiment: {0}")]
    DegenerateExperiment(String),
    #[error("states cache mismatch: cache has params hash {found}, run expects {expected}")]
    CacheMismatch { expected: String, found: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
