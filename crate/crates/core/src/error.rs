use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be at least 1")]
    InvalidDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("arm index {arm} out of range (num_arms = {num_arms})")]
    ArmOutOfRange { arm: usize, num_arms: usize },

    #[error("cluster index {cluster} out of range (num_clusters = {num_clusters})")]
    ClusterOutOfRange { cluster: usize, num_clusters: usize },

    #[error("cluster model is not initialized yet (still in warmup)")]
    ClustersUninitialized,

    #[error("score vector is empty")]
    EmptyScores,

    #[error("score for arm {0} is NaN")]
    NanScore(usize),

    #[error("round index {t} out of range (rounds = {rounds})")]
    RoundOutOfRange { t: usize, rounds: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset {name}: expected dims (T={expected_rows}, d={expected_dim}, K={expected_arms}), parsed (T={rows}, d={dim}, K={arms})")]
    DimsMismatch {
        name: String,
        expected_rows: usize,
        expected_dim: usize,
        expected_arms: usize,
        rows: usize,
        dim: usize,
        arms: usize,
    },

    #[error("parse error at row {row}: {message}")]
    ParseRow { row: usize, message: String },

    #[error("dataset must have at least 2 label classes, found {0}")]
    TooFewClasses(usize),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config file error: {0}")]
    ConfigFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
