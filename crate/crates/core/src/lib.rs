//! Contextual bandits with missing rewards.
//!
//! The library replays labeled datasets as contextual bandit problems and
//! compares two linear policies under reward masking:
//!
//! - **LinUCB**: per-arm online ridge regression with an optimism bonus
//!   `alpha * sqrt(x^T A^{-1} x)`; it can only learn from rounds whose
//!   reward is revealed.
//! - **MLINUCB**: the same policy, except that when a reward is masked it
//!   substitutes an imputed value from online cluster statistics (an
//!   inverse-distance weighted average of per-cluster mean rewards), so the
//!   model still absorbs every context.
//!
//! Supporting pieces: exact rank-1-updatable SPD matrices ([`linalg`]),
//! streaming mini-batch k-means with per-(cluster, arm) reward statistics
//! ([`cluster`]), dataset replay with seeded reward masking
//! ([`environment`]), CSV/synthetic dataset ingestion and a 2D PCA
//! diagnostic ([`ingest`]), and a sweep runner with log-det regret-bound
//! traces and file outputs ([`harness`]).

pub mod cluster;
pub mod environment;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod policy;

pub use cluster::{ClusterConfig, ClusterModel, FallbackLevel};
pub use environment::{step, BanditDataset, MaskMode, MaskSchedule};
pub use error::{Error, Result};
pub use harness::{
    bound_trace, run_experiment, sweep, Algorithm, BoundTracePoint, CellResult, ExperimentConfig,
    RoundLog, Summary,
};
pub use ingest::{
    load_csv, min_max_scale, pca2_variance, synth_linear, DatasetSpec, LabelColumn, Pca2,
};
pub use linalg::SpdState;
pub use policy::{select_arm, LinUcbPolicy, MlinUcb, PolicyConfig, RoundOutcome, ScoreVector};
