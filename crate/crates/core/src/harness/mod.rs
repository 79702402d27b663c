//! Config-driven experiment runner: replays a dataset through a policy,
//! sweeps hyperparameter grids, tracks the log-det quantities behind the
//! regret-bound diagnostic, and writes machine-readable results.

mod emit;

pub use emit::{
    write_bound_trace, write_centroids, write_pca_csv, write_rounds, write_summary_csv,
    OutputFormat,
};

use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterConfig, FallbackLevel};
use crate::environment::{BanditDataset, MaskMode, MaskSchedule};
use crate::error::{Error, Result};
use crate::linalg::SpdState;
use crate::policy::{LinUcbPolicy, MlinUcb, PolicyConfig, RoundOutcome};

/// Seed-stream tags so every random component gets an independent,
/// reproducible stream derived from the one experiment seed.
const TAG_SHUFFLE: u64 = 0x01;
const TAG_MASK: u64 = 0x02;
const TAG_POLICY: u64 = 0x03;
const TAG_CLUSTER: u64 = 0x04;
const TAG_SUBSAMPLE: u64 = 0x05;

/// splitmix64 finalizer over (seed, tag).
fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LinUcb,
    MlinUcb,
    Random,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::LinUcb => "linucb",
            Algorithm::MlinUcb => "mlinucb",
            Algorithm::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linucb" => Ok(Algorithm::LinUcb),
            "mlinucb" => Ok(Algorithm::MlinUcb),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm '{}'; expected linucb, mlinucb, or random",
                other
            ))),
        }
    }
}

/// One experiment cell: dataset name (echo only; the dataset itself is
/// passed to the runner), algorithm, and every knob of the replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Number of clusters N (ignored by linucb/random).
    pub clusters: usize,
    /// Imputation neighbors m (ignored by linucb/random).
    pub neighbors: usize,
    pub missing_rate: f64,
    pub seed: u64,
    /// Optional row cap, applied as a seeded subsample before the replay.
    pub subsample: Option<usize>,
    pub passes: usize,
    /// Confidence parameter for the bound trace.
    pub delta: f64,
    /// Noise scale for the bound trace.
    pub sigma: f64,
    pub mask_mode: MaskMode,
    pub full_recluster: bool,
    /// Min-max scale every feature into [0, 1] before the replay.
    pub scale_features: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "synthetic".into(),
            algorithm: Algorithm::LinUcb,
            alpha: 0.25,
            clusters: 10,
            neighbors: 1,
            missing_rate: 0.0,
            seed: 0,
            subsample: None,
            passes: 1,
            delta: 0.05,
            sigma: 1.0,
            mask_mode: MaskMode::Bernoulli,
            full_recluster: false,
            scale_features: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) || !self.missing_rate.is_finite() {
            return Err(Error::InvalidConfig("missing_rate must be in [0, 1]".into()));
        }
        if self.passes == 0 {
            return Err(Error::InvalidConfig("passes must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig("delta must be in (0, 1)".into()));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidConfig("sigma must be finite and > 0".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::InvalidConfig("subsample must be >= 1".into()));
        }
        if self.algorithm == Algorithm::MlinUcb {
            if self.clusters == 0 {
                return Err(Error::InvalidConfig("clusters must be >= 1".into()));
            }
            if self.neighbors == 0 || self.neighbors > self.clusters {
                return Err(Error::InvalidConfig(format!(
                    "neighbors must be in 1..={}, got {}",
                    self.clusters, self.neighbors
                )));
            }
        }
        Ok(())
    }

    /// Stable identifier for file names and log lines.
    pub fn cell_id(&self) -> String {
        match self.algorithm {
            Algorithm::MlinUcb => format!(
                "{}-{}-N{}-m{}-a{}-p{}-seed{}",
                self.dataset,
                self.algorithm,
                self.clusters,
                self.neighbors,
                self.alpha,
                self.missing_rate,
                self.seed
            ),
            _ => format!(
                "{}-{}-a{}-p{}-seed{}",
                self.dataset, self.algorithm, self.alpha, self.missing_rate, self.seed
            ),
        }
    }
}

/// Per-round record of the replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub t: usize,
    pub chosen_arm: usize,
    pub best_arm: usize,
    pub revealed: bool,
    /// Reward the arm update used; absent when no update happened (linucb
    /// on a masked round, and every random-policy round).
    pub effective_reward: Option<f64>,
    pub fallback_level: Option<FallbackLevel>,
    pub cumulative_accuracy: f64,
    /// Sum over arms of `log det A_k`.
    #[serde(rename = "logdet_A")]
    pub logdet_a: f64,
    /// Sum over arms of `log det S_k`, where `S_k` accumulates exactly the
    /// masked rounds on which arm k was chosen.
    #[serde(rename = "logdet_S")]
    pub logdet_s: f64,
}

/// End-of-run metrics.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub rounds: usize,
    /// Fraction of rounds where the chosen arm equals the true label.
    pub total_average_accuracy: f64,
    /// Number of incorrect rounds (the best arm's reward is always 1).
    pub cumulative_regret: u64,
    pub missing_fraction_realized: f64,
    pub wall_time_secs: f64,
}

enum AlgoState {
    Random(ChaCha8Rng),
    LinUcb(LinUcbPolicy),
    MlinUcb(MlinUcb),
}

/// Everything a finished run leaves behind.
pub struct RunArtifacts {
    pub summary: Summary,
    pub logs: Vec<RoundLog>,
    /// Final cluster state, for centroid dumps (mlinucb runs only).
    pub clusters: Option<crate::cluster::ClusterModel>,
}

/// Execute the full replay described by `cfg` over `ds`. Deterministic
/// given (config, seed).
pub fn run_experiment(cfg: &ExperimentConfig, ds: &BanditDataset) -> Result<(Summary, Vec<RoundLog>)> {
    run_experiment_full(cfg, ds).map(|a| (a.summary, a.logs))
}

/// [`run_experiment`] plus the final policy-side state.
pub fn run_experiment_full(cfg: &ExperimentConfig, ds: &BanditDataset) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();

    let scaled;
    let ds = if cfg.scale_features {
        scaled = crate::ingest::min_max_scale(ds)?;
        &scaled
    } else {
        ds
    };
    let replay_base;
    let ds = if let Some(n) = cfg.subsample {
        replay_base = ds.subsample(n, mix_seed(cfg.seed, TAG_SUBSAMPLE));
        &replay_base
    } else {
        ds
    };

    let num_arms = ds.num_arms();
    let dim = ds.dim();
    let rounds_total = ds.rows() * cfg.passes;

    let mut state = match cfg.algorithm {
        Algorithm::Random => AlgoState::Random(ChaCha8Rng::seed_from_u64(mix_seed(
            cfg.seed, TAG_POLICY,
        ))),
        Algorithm::LinUcb => {
            AlgoState::LinUcb(LinUcbPolicy::new(PolicyConfig::new(num_arms, dim, cfg.alpha)?)?)
        }
        Algorithm::MlinUcb => {
            let mut cluster_cfg = ClusterConfig::new(
                cfg.clusters,
                cfg.neighbors,
                mix_seed(cfg.seed, TAG_CLUSTER),
            );
            cluster_cfg.full_recluster = cfg.full_recluster;
            AlgoState::MlinUcb(MlinUcb::new(
                PolicyConfig::new(num_arms, dim, cfg.alpha)?,
                cluster_cfg,
            )?)
        }
    };

    // S_k = I + sum of x x^T over masked rounds where arm k was chosen;
    // only meaningful when a linear policy maintains matching A_k state.
    let mut s_states: Option<Vec<SpdState>> = match cfg.algorithm {
        Algorithm::Random => None,
        _ => Some(
            (0..num_arms)
                .map(|_| SpdState::identity(dim))
                .collect::<Result<_>>()?,
        ),
    };

    let mut logs = Vec::with_capacity(rounds_total);
    let mut correct: u64 = 0;
    let mut masked: u64 = 0;
    let mut global_t = 0usize;

    for pass in 0..cfg.passes {
        let replay = ds.shuffle(mix_seed(cfg.seed, TAG_SHUFFLE.wrapping_add(pass as u64)));
        let mask = MaskSchedule::new(
            cfg.missing_rate,
            mix_seed(cfg.seed, TAG_MASK.wrapping_add(pass as u64)),
            replay.rows(),
            cfg.mask_mode,
        )?;

        for t in 0..replay.rows() {
            let x = replay.context(t);
            let best = replay.label(t);
            let revealed = mask.revealed(t);

            let outcome = match &mut state {
                AlgoState::Random(rng) => RoundOutcome {
                    chosen_arm: rng.random_range(0..num_arms),
                    revealed,
                    effective_reward: None,
                    fallback: None,
                    cluster: None,
                },
                AlgoState::LinUcb(policy) => {
                    policy.round(x, |chosen| (f64::from(chosen == best), revealed))?
                }
                AlgoState::MlinUcb(m) => {
                    m.round(x, |chosen| (f64::from(chosen == best), revealed))?
                }
            };

            if outcome.chosen_arm == best {
                correct += 1;
            }
            if !revealed {
                masked += 1;
                if let Some(s) = s_states.as_mut() {
                    s[outcome.chosen_arm].rank1_update(x)?;
                }
            }

            let logdet_a = match &state {
                AlgoState::Random(_) => 0.0,
                AlgoState::LinUcb(p) => p.arms().iter().map(|a| a.design().logdet()).sum(),
                AlgoState::MlinUcb(m) => {
                    m.policy().arms().iter().map(|a| a.design().logdet()).sum()
                }
            };
            let logdet_s = s_states
                .as_ref()
                .map(|s| s.iter().map(|m| m.logdet()).sum())
                .unwrap_or(0.0);

            logs.push(RoundLog {
                t: global_t,
                chosen_arm: outcome.chosen_arm,
                best_arm: best,
                revealed,
                effective_reward: outcome.effective_reward,
                fallback_level: outcome.fallback,
                cumulative_accuracy: correct as f64 / (global_t + 1) as f64,
                logdet_a,
                logdet_s,
            });
            global_t += 1;
        }
    }

    let summary = Summary {
        config: cfg.clone(),
        rounds: rounds_total,
        total_average_accuracy: correct as f64 / rounds_total as f64,
        cumulative_regret: rounds_total as u64 - correct,
        missing_fraction_realized: masked as f64 / rounds_total as f64,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let clusters = match state {
        AlgoState::MlinUcb(m) => Some(m.into_clusters()),
        _ => None,
    };
    Ok(RunArtifacts {
        summary,
        logs,
        clusters,
    })
}

/// Per-round components of the data-dependent regret bound.
///
/// `theta_term` is `||theta|| / sqrt(phi)` with the coefficient norm bounded
/// by 1 and `phi` fixed at 1, since no value is assigned to it; the term is
/// reported separately so callers can rescale it.
#[derive(Debug, Clone, Serialize)]
pub struct BoundTracePoint {
    pub t: usize,
    /// `logdet_A - logdet_S`; grows only when a revealed round updates A
    /// without updating S.
    pub delta_logdet: f64,
    /// `sqrt(d * (delta/2 + ln(1/delta_conf)))`.
    pub confidence_width: f64,
    pub theta_term: f64,
    /// `sqrt(18 * n * delta_logdet)` after n rounds.
    pub radius: f64,
    /// `sigma * (confidence_width + theta_term) * radius`.
    pub bound: f64,
    pub phi: f64,
}

/// Expand per-round logs into the bound components. `dim` is the context
/// dimension d of the underlying dataset.
pub fn bound_trace(logs: &[RoundLog], cfg: &ExperimentConfig, dim: usize) -> Vec<BoundTracePoint> {
    let phi: f64 = 1.0;
    let theta_norm_bound = 1.0;
    let theta_term = theta_norm_bound / phi.sqrt();
    logs.iter()
        .enumerate()
        .map(|(i, log)| {
            let delta = log.logdet_a - log.logdet_s;
            let n = (i + 1) as f64;
            let confidence_width = (dim as f64 * (0.5 * delta + (1.0 / cfg.delta).ln())).sqrt();
            let radius = (18.0 * n * delta).max(0.0).sqrt();
            BoundTracePoint {
                t: log.t,
                delta_logdet: delta,
                confidence_width,
                theta_term,
                radius,
                bound: cfg.sigma * (confidence_width + theta_term) * radius,
                phi,
            }
        })
        .collect()
}

/// Aggregated result of one sweep cell (one config run across seeds).
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub acc_mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub acc_std: f64,
    pub regret_mean: f64,
    pub error: Option<String>,
}

/// Run every config in `cells` for every seed in `seeds` and aggregate.
/// Cell failures are recorded per cell; the sweep itself never aborts.
/// `parallelism` caps the worker threads (0 uses the rayon default).
pub fn sweep(
    ds: &BanditDataset,
    cells: &[ExperimentConfig],
    seeds: &[u64],
    parallelism: usize,
) -> Vec<CellResult> {
    let run_cell = |cfg: &ExperimentConfig| -> CellResult {
        let mut accuracies = Vec::with_capacity(seeds.len());
        let mut regrets = Vec::with_capacity(seeds.len());
        let mut used_seeds = Vec::with_capacity(seeds.len());
        let mut error = None;
        for &seed in seeds {
            let mut cell_cfg = cfg.clone();
            cell_cfg.seed = seed;
            match run_experiment(&cell_cfg, ds) {
                Ok((summary, _)) => {
                    accuracies.push(summary.total_average_accuracy);
                    regrets.push(summary.cumulative_regret as f64);
                    used_seeds.push(seed);
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let acc_mean = mean(&accuracies);
        CellResult {
            config: cfg.clone(),
            seeds: used_seeds,
            acc_std: sample_std(&accuracies, acc_mean),
            acc_mean,
            regret_mean: mean(&regrets),
            accuracies,
            error,
        }
    };

    if parallelism == 1 {
        return cells.iter().map(run_cell).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build();
    match pool {
        Ok(pool) => pool.install(|| cells.par_iter().map(run_cell).collect()),
        Err(_) => cells.iter().map(run_cell).collect(),
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sample_std(v: &[f64], mean: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

/// Flat key-value config file (TOML) mirroring the CLI flags; flags override
/// file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<String>,
    pub data_dir: Option<String>,
    pub label_column: Option<String>,
    pub algo: Option<String>,
    pub alpha: Option<f64>,
    pub clusters: Option<usize>,
    pub neighbors: Option<usize>,
    pub missing_rate: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub subsample: Option<usize>,
    pub passes: Option<usize>,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    pub out_dir: Option<String>,
    pub format: Option<String>,
    pub mask_mode: Option<String>,
    pub full_recluster: Option<bool>,
    pub scale_features: Option<bool>,
}

pub fn load_file_config(path: &std::path::Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::ConfigFile(e.to_string()))
}
