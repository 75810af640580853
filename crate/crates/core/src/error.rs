use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: unsupported predicate `{text}` (only `f<index> < threshold` splits are allowed)")]
    UnsupportedPredicate {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("original margin is exactly 0, the mislabel direction is ambiguous")]
    ZeroMargin,

    #[error("model has no trees")]
    EmptyEnsemble,

    #[error("inconsistent predicate valuation for feature {feature}")]
    InconsistentValuation { feature: usize },

    #[error("symbolic instance has no perturbed feature")]
    NotChanged,

    #[error("{cells} interval cells exceed the enumeration cap of {cap}")]
    TooManyCells { cells: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad IDX file {path}: {msg}")]
    Idx { path: PathBuf, msg: String },

    #[error("only {found} instances qualify, {wanted} requested")]
    InsufficientInstances { found: usize, wanted: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
