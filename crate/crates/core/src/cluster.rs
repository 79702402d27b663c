//! Online clustering of context vectors and per-(cluster, arm) reward
//! statistics, used to impute rewards that were never revealed.
//!
//! Contexts stream in one at a time. The first `max(N, 25)` are buffered and
//! seed a k-means++ initialization; afterwards each context moves its nearest
//! centroid by the standard per-sample mini-batch rule (learning rate `1/n_j`).
//! Rewards that are actually observed are recorded against the cluster the
//! context landed in; the imputed value for a context is an inverse-distance
//! weighted average of per-cluster average rewards over the `m` nearest
//! clusters that have at least one observation for the arm in question.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of buffered contexts before centroids are initialized.
const WARMUP_FLOOR: usize = 25;

/// Which rung of the fallback chain produced an imputed reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackLevel {
    /// Inverse-distance weighted average over qualifying clusters.
    Weighted,
    /// No qualifying cluster; global per-arm average used.
    GlobalArm,
    /// No observation anywhere for the arm; constant 0.0 used.
    Constant,
}

/// One cluster: running mean, assignment count, and per-arm reward sums.
#[derive(Debug, Clone)]
pub struct Centroid {
    mean: Vec<f64>,
    assign_count: u64,
    reward_sum: Vec<f64>,
    reward_count: Vec<u64>,
}

impl Centroid {
    fn new(mean: Vec<f64>, assign_count: u64, num_arms: usize) -> Self {
        Self {
            mean,
            assign_count,
            reward_sum: vec![0.0; num_arms],
            reward_count: vec![0; num_arms],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn assign_count(&self) -> u64 {
        self.assign_count
    }

    pub fn reward_count(&self, arm: usize) -> u64 {
        self.reward_count[arm]
    }

    /// Average observed reward for `arm` within this cluster, if any.
    pub fn reward_avg(&self, arm: usize) -> Option<f64> {
        if self.reward_count[arm] == 0 {
            None
        } else {
            Some(self.reward_sum[arm] / self.reward_count[arm] as f64)
        }
    }
}

/// Clustering hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Number of clusters N.
    pub num_clusters: usize,
    /// Number of nearest clusters m used by the weighted imputation.
    pub neighbors: usize,
    /// Seed for k-means++ initialization.
    pub seed: u64,
    /// Distances below this short-circuit the weighted average to the
    /// cluster's own mean reward (the weight 1/d would blow up).
    pub zero_dist_epsilon: f64,
    /// Re-cluster the entire context history every round instead of the
    /// incremental mini-batch update (fidelity mode, O(t) per round).
    pub full_recluster: bool,
}

impl ClusterConfig {
    pub fn new(num_clusters: usize, neighbors: usize, seed: u64) -> Self {
        Self {
            num_clusters,
            neighbors,
            seed,
            zero_dist_epsilon: 1e-9,
            full_recluster: false,
        }
    }
}

/// Where a context ended up when it was observed; routes a later reward
/// observation to the right statistics.
#[derive(Debug, Clone)]
pub struct ContextSlot {
    kind: SlotKind,
}

#[derive(Debug, Clone)]
enum SlotKind {
    /// Still in warmup; only global per-arm statistics can absorb a reward.
    Buffered,
    Assigned {
        cluster: usize,
        dist: f64,
        history_idx: Option<usize>,
    },
}

impl ContextSlot {
    /// Cluster index, once centroids exist.
    pub fn cluster(&self) -> Option<usize> {
        match self.kind {
            SlotKind::Buffered => None,
            SlotKind::Assigned { cluster, .. } => Some(cluster),
        }
    }

    pub fn distance(&self) -> Option<f64> {
        match self.kind {
            SlotKind::Buffered => None,
            SlotKind::Assigned { dist, .. } => Some(dist),
        }
    }
}

/// Streaming cluster model plus reward statistics.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    cfg: ClusterConfig,
    num_arms: usize,
    dim: Option<usize>,
    warmup_target: usize,
    buffer: Vec<Vec<f64>>,
    centroids: Vec<Centroid>,
    global_reward_sum: Vec<f64>,
    global_reward_count: Vec<u64>,
    /// Full context history; populated only in full-recluster mode.
    history: Vec<Vec<f64>>,
    /// (history index, arm, reward) triples for stat rebuilds in
    /// full-recluster mode.
    reward_history: Vec<(usize, usize, f64)>,
}

impl ClusterModel {
    pub fn new(cfg: ClusterConfig, num_arms: usize) -> Result<Self> {
        if cfg.num_clusters == 0 {
            return Err(Error::InvalidConfig("num_clusters must be >= 1".into()));
        }
        if cfg.neighbors == 0 || cfg.neighbors > cfg.num_clusters {
            return Err(Error::InvalidConfig(format!(
                "neighbors must be in 1..={}, got {}",
                cfg.num_clusters, cfg.neighbors
            )));
        }
        if num_arms == 0 {
            return Err(Error::InvalidConfig("num_arms must be >= 1".into()));
        }
        Ok(Self {
            cfg,
            num_arms,
            dim: None,
            warmup_target: cfg.num_clusters.max(WARMUP_FLOOR),
            buffer: Vec::new(),
            centroids: Vec::new(),
            global_reward_sum: vec![0.0; num_arms],
            global_reward_count: vec![0; num_arms],
            history: Vec::new(),
            reward_history: Vec::new(),
        })
    }

    pub fn is_initialized(&self) -> bool {
        !self.centroids.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.cfg.num_clusters
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    /// Average of every reward recorded for `arm`, across all clusters and
    /// the warmup period.
    pub fn global_average(&self, arm: usize) -> Option<f64> {
        if self.global_reward_count[arm] == 0 {
            None
        } else {
            Some(self.global_reward_sum[arm] / self.global_reward_count[arm] as f64)
        }
    }

    /// Feed one context into the model (warmup buffering, then assignment
    /// plus centroid update). Returns a slot for routing a later reward.
    pub fn observe(&mut self, x: &[f64]) -> Result<ContextSlot> {
        self.check_context(x)?;
        if !self.is_initialized() {
            self.buffer.push(x.to_vec());
            if self.buffer.len() >= self.warmup_target {
                let points = std::mem::take(&mut self.buffer);
                self.initialize(&points)?;
                let (cluster, dist) = self.assign(x)?;
                let history_idx = self.push_history(x);
                return Ok(ContextSlot {
                    kind: SlotKind::Assigned {
                        cluster,
                        dist,
                        history_idx,
                    },
                });
            }
            return Ok(ContextSlot {
                kind: SlotKind::Buffered,
            });
        }

        if self.cfg.full_recluster {
            let history_idx = self.push_history(x);
            self.lloyd_sweep();
            let (cluster, dist) = self.assign(x)?;
            Ok(ContextSlot {
                kind: SlotKind::Assigned {
                    cluster,
                    dist,
                    history_idx,
                },
            })
        } else {
            let (cluster, dist) = self.assign(x)?;
            self.minibatch_step(cluster, x);
            Ok(ContextSlot {
                kind: SlotKind::Assigned {
                    cluster,
                    dist,
                    history_idx: None,
                },
            })
        }
    }

    /// k-means++ over `points`, deterministic in the configured seed. Called
    /// automatically when the warmup buffer fills; public so callers with a
    /// pre-collected batch can initialize directly.
    pub fn initialize(&mut self, points: &[Vec<f64>]) -> Result<()> {
        if self.is_initialized() {
            return Err(Error::InvalidConfig(
                "cluster model already initialized".into(),
            ));
        }
        let n_clusters = self.cfg.num_clusters;
        if points.len() < n_clusters {
            return Err(Error::InvalidConfig(format!(
                "need at least {} points to initialize, got {}",
                n_clusters,
                points.len()
            )));
        }
        for p in points {
            self.check_context(p)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);

        // k-means++ seeding: first uniform, rest proportional to squared
        // distance from the nearest already-chosen seed.
        let mut seed_idx: Vec<usize> = Vec::with_capacity(n_clusters);
        let first = rng.random_range(0..points.len());
        seed_idx.push(first);
        let mut dist2: Vec<f64> = points
            .iter()
            .map(|p| squared_distance(p, &points[first]))
            .collect();
        while seed_idx.len() < n_clusters {
            let total: f64 = dist2.iter().sum();
            if total <= 0.0 {
                break; // fewer distinct points than clusters
            }
            let mut r = rng.random::<f64>() * total;
            let mut chosen = dist2.len() - 1;
            for (i, d2) in dist2.iter().enumerate() {
                r -= d2;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            seed_idx.push(chosen);
            for (i, d2) in dist2.iter_mut().enumerate() {
                *d2 = d2.min(squared_distance(&points[i], &points[chosen]));
            }
        }

        self.centroids = seed_idx
            .iter()
            .map(|&i| Centroid::new(points[i].clone(), 1, self.num_arms))
            .collect();

        // Duplicate-tolerant fallback: pad with perturbed copies of existing
        // seeds so exactly N centroids exist.
        if self.centroids.len() < n_clusters {
            log::warn!(
                "k-means++ found only {} distinct points for {} clusters; padding with perturbed copies",
                self.centroids.len(),
                n_clusters
            );
            let existing = self.centroids.len();
            for i in existing..n_clusters {
                let base = self.centroids[i % existing].mean.clone();
                let scale = 1e-6 * (1.0 + base.iter().map(|v| v * v).sum::<f64>().sqrt());
                let mean: Vec<f64> = base
                    .iter()
                    .map(|&v| {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        v + scale * noise
                    })
                    .collect();
                self.centroids.push(Centroid::new(mean, 0, self.num_arms));
            }
        }

        // Replay the non-seed points through the mini-batch rule so the
        // centroids reflect the whole warmup batch.
        let mut is_seed = vec![false; points.len()];
        for &i in &seed_idx {
            is_seed[i] = true;
        }
        for (i, p) in points.iter().enumerate() {
            if !is_seed[i] {
                let (j, _) = self.assign(p)?;
                self.minibatch_step(j, p);
            }
        }

        if self.cfg.full_recluster {
            self.history = points.to_vec();
        }
        Ok(())
    }

    /// Index and Euclidean distance of the nearest centroid (ties go to the
    /// lowest index).
    pub fn assign(&self, x: &[f64]) -> Result<(usize, f64)> {
        if !self.is_initialized() {
            return Err(Error::ClustersUninitialized);
        }
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (j, c) in self.centroids.iter().enumerate() {
            let d2 = squared_distance(x, &c.mean);
            if d2 < best_d2 {
                best = j;
                best_d2 = d2;
            }
        }
        Ok((best, best_d2.sqrt()))
    }

    /// Record a genuinely observed reward for `arm` against the slot's
    /// cluster (warmup-period rewards only reach the global statistics).
    pub fn record_reward(&mut self, slot: &ContextSlot, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.num_arms {
            return Err(Error::ArmOutOfRange {
                arm,
                num_arms: self.num_arms,
            });
        }
        if !reward.is_finite() || !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        self.global_reward_sum[arm] += reward;
        self.global_reward_count[arm] += 1;
        if let SlotKind::Assigned {
            cluster,
            history_idx,
            ..
        } = slot.kind
        {
            if cluster >= self.centroids.len() {
                return Err(Error::ClusterOutOfRange {
                    cluster,
                    num_clusters: self.centroids.len(),
                });
            }
            self.centroids[cluster].reward_sum[arm] += reward;
            self.centroids[cluster].reward_count[arm] += 1;
            if let Some(idx) = history_idx {
                self.reward_history.push((idx, arm, reward));
            }
        }
        Ok(())
    }

    /// Imputed reward for `x` on `arm` plus the fallback rung that produced
    /// it. Total: always returns a value in [0, 1].
    pub fn impute(&self, x: &[f64], arm: usize) -> (f64, FallbackLevel) {
        debug_assert!(arm < self.num_arms);
        if self.is_initialized() {
            // m nearest clusters that have at least one observation for arm
            let mut candidates: Vec<(f64, usize)> = self
                .centroids
                .iter()
                .enumerate()
                .filter(|(_, c)| c.reward_count[arm] > 0)
                .map(|(j, c)| (squared_distance(x, &c.mean).sqrt(), j))
                .collect();
            candidates
                .sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            candidates.truncate(self.cfg.neighbors);

            if !candidates.is_empty() {
                let (d0, j0) = candidates[0];
                let avg0 = self.centroids[j0].reward_avg(arm).unwrap();
                // zero-distance guard, and the m=1 reduction must be the
                // plain cluster average exactly
                if d0 < self.cfg.zero_dist_epsilon || candidates.len() == 1 {
                    return (avg0, FallbackLevel::Weighted);
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(d, j) in &candidates {
                    let avg = self.centroids[j].reward_avg(arm).unwrap();
                    num += avg / d;
                    den += 1.0 / d;
                }
                return ((num / den).clamp(0.0, 1.0), FallbackLevel::Weighted);
            }
        }
        if let Some(avg) = self.global_average(arm) {
            return (avg, FallbackLevel::GlobalArm);
        }
        (0.0, FallbackLevel::Constant)
    }

    fn minibatch_step(&mut self, cluster: usize, x: &[f64]) {
        let c = &mut self.centroids[cluster];
        c.assign_count += 1;
        let rate = 1.0 / c.assign_count as f64;
        for (m, &xi) in c.mean.iter_mut().zip(x.iter()) {
            *m += (xi - *m) * rate;
        }
    }

    fn push_history(&mut self, x: &[f64]) -> Option<usize> {
        if self.cfg.full_recluster {
            self.history.push(x.to_vec());
            Some(self.history.len() - 1)
        } else {
            None
        }
    }

    /// One Lloyd sweep over the whole history, warm-started from the current
    /// centroids, followed by a rebuild of the per-cluster reward statistics.
    fn lloyd_sweep(&mut self) {
        let n_clusters = self.centroids.len();
        let dim = self.dim.expect("dim set before initialization");
        let mut sums = vec![vec![0.0; dim]; n_clusters];
        let mut counts = vec![0u64; n_clusters];
        let mut assignment = vec![0usize; self.history.len()];
        for (i, x) in self.history.iter().enumerate() {
            let mut best = 0;
            let mut best_d2 = f64::INFINITY;
            for (j, c) in self.centroids.iter().enumerate() {
                let d2 = squared_distance(x, &c.mean);
                if d2 < best_d2 {
                    best = j;
                    best_d2 = d2;
                }
            }
            assignment[i] = best;
            counts[best] += 1;
            for (s, &xi) in sums[best].iter_mut().zip(x.iter()) {
                *s += xi;
            }
        }
        for (j, c) in self.centroids.iter_mut().enumerate() {
            c.assign_count = counts[j];
            if counts[j] > 0 {
                for (m, s) in c.mean.iter_mut().zip(sums[j].iter()) {
                    *m = s / counts[j] as f64;
                }
            }
            // empty clusters keep their previous mean
            c.reward_sum.iter_mut().for_each(|v| *v = 0.0);
            c.reward_count.iter_mut().for_each(|v| *v = 0);
        }
        for &(idx, arm, reward) in &self.reward_history {
            let j = assignment[idx];
            self.centroids[j].reward_sum[arm] += reward;
            self.centroids[j].reward_count[arm] += 1;
        }
    }

    fn check_context(&mut self, x: &[f64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "context" });
        }
        match self.dim {
            None => {
                self.dim = Some(x.len());
                Ok(())
            }
            Some(d) if d == x.len() => Ok(()),
            Some(d) => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
