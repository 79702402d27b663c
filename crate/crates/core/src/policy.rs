//! LinUCB arm scoring, selection, and updates, plus the missing-reward
//! control flow that substitutes an imputed reward when the environment
//! reveals nothing.
//!
//! Each arm keeps online ridge-regression state `(A_k, b_k)` with
//! `A_k = I + sum x x^T` over the contexts it was updated on. Scores are
//! `theta_k . x + alpha * sqrt(x^T A_k^{-1} x)` with `theta_k = A_k^{-1} b_k`.

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterConfig, ClusterModel, FallbackLevel};
use crate::error::{Error, Result};
use crate::linalg::SpdState;

/// Policy hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub num_arms: usize,
    pub dim: usize,
    /// Exploration weight; 0 means pure exploitation.
    pub alpha: f64,
}

impl PolicyConfig {
    pub fn new(num_arms: usize, dim: usize, alpha: f64) -> Result<Self> {
        let cfg = Self {
            num_arms,
            dim,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms < 2 {
            return Err(Error::InvalidConfig("num_arms must be >= 2".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Ridge-regression state for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    arm_id: usize,
    a: SpdState,
    b: Vec<f64>,
    /// Cached `A^{-1} b`, refreshed on every update.
    theta: Vec<f64>,
}

impl ArmModel {
    fn new(arm_id: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            arm_id,
            a: SpdState::identity(dim)?,
            b: vec![0.0; dim],
            theta: vec![0.0; dim],
        })
    }

    pub fn arm_id(&self) -> usize {
        self.arm_id
    }

    pub fn design(&self) -> &SpdState {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Per-arm scores for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn from_vec(scores: Vec<f64>) -> Self {
        Self(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Smallest index attaining the maximum score.
pub fn select_arm(scores: &ScoreVector) -> Result<usize> {
    if scores.0.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, &s) in scores.0.iter().enumerate() {
        if s.is_nan() {
            return Err(Error::NanScore(k));
        }
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    Ok(best)
}

/// What one round produced, for the caller's bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub chosen_arm: usize,
    pub revealed: bool,
    /// Reward the arm update actually used; `None` when the policy skipped
    /// the update (LinUCB with a masked reward).
    pub effective_reward: Option<f64>,
    /// Which fallback rung produced the reward, when it was imputed.
    pub fallback: Option<FallbackLevel>,
    /// Cluster the context was assigned to, when clustering is in play.
    pub cluster: Option<usize>,
}

/// Plain LinUCB: per-arm ridge regression with a UCB bonus. Skips the arm
/// update entirely when the reward is not revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbPolicy {
    cfg: PolicyConfig,
    arms: Vec<ArmModel>,
}

impl LinUcbPolicy {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let arms = (0..cfg.num_arms)
            .map(|k| ArmModel::new(k, cfg.dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, arms })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    /// `p_k = theta_k . x + alpha * sqrt(x^T A_k^{-1} x)` for every arm.
    pub fn score_arms(&self, x: &[f64]) -> Result<ScoreVector> {
        if x.len() != self.cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim,
                got: x.len(),
            });
        }
        let mut scores = Vec::with_capacity(self.arms.len());
        for arm in &self.arms {
            let mean: f64 = arm.theta.iter().zip(x.iter()).map(|(t, v)| t * v).sum();
            let bonus = self.cfg.alpha * arm.a.quad_form(x)?.max(0.0).sqrt();
            scores.push(mean + bonus);
        }
        Ok(ScoreVector(scores))
    }

    /// `A_k += x x^T`, `b_k += r x`; other arms untouched.
    pub fn update_arm(&mut self, arm: usize, x: &[f64], reward: f64) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(Error::ArmOutOfRange {
                arm,
                num_arms: self.arms.len(),
            });
        }
        if !reward.is_finite() || !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        let model = &mut self.arms[arm];
        model.a.rank1_update(x)?;
        for (bi, &xi) in model.b.iter_mut().zip(x.iter()) {
            *bi += reward * xi;
        }
        model.theta = model.a.solve(&model.b)?;
        Ok(())
    }

    /// One replay round: score, select, then update only if the environment
    /// revealed the reward.
    pub fn round(
        &mut self,
        x: &[f64],
        feedback: impl FnOnce(usize) -> (f64, bool),
    ) -> Result<RoundOutcome> {
        let scores = self.score_arms(x)?;
        let chosen = select_arm(&scores)?;
        let (reward, revealed) = feedback(chosen);
        let effective = if revealed {
            self.update_arm(chosen, x, reward)?;
            Some(reward)
        } else {
            None
        };
        Ok(RoundOutcome {
            chosen_arm: chosen,
            revealed,
            effective_reward: effective,
            fallback: None,
            cluster: None,
        })
    }
}

/// LinUCB that never skips a round: when the reward is masked it substitutes
/// the cluster-imputed value, so the design matrix still absorbs the context.
#[derive(Debug, Clone)]
pub struct MlinUcb {
    policy: LinUcbPolicy,
    clusters: ClusterModel,
}

impl MlinUcb {
    pub fn new(policy_cfg: PolicyConfig, cluster_cfg: ClusterConfig) -> Result<Self> {
        let policy = LinUcbPolicy::new(policy_cfg)?;
        let clusters = ClusterModel::new(cluster_cfg, policy_cfg.num_arms)?;
        Ok(Self { policy, clusters })
    }

    pub fn policy(&self) -> &LinUcbPolicy {
        &self.policy
    }

    pub fn clusters(&self) -> &ClusterModel {
        &self.clusters
    }

    pub fn clusters_mut(&mut self) -> &mut ClusterModel {
        &mut self.clusters
    }

    pub fn into_clusters(self) -> ClusterModel {
        self.clusters
    }

    /// One replay round: cluster the context, score/select, then update the
    /// chosen arm with the observed reward (recording it into the cluster
    /// statistics) or with the imputed one (leaving the statistics alone).
    pub fn round(
        &mut self,
        x: &[f64],
        feedback: impl FnOnce(usize) -> (f64, bool),
    ) -> Result<RoundOutcome> {
        let slot = self.clusters.observe(x)?;
        let scores = self.policy.score_arms(x)?;
        let chosen = select_arm(&scores)?;
        let (reward, revealed) = feedback(chosen);
        let (effective, fallback) = if revealed {
            self.clusters.record_reward(&slot, chosen, reward)?;
            (reward, None)
        } else {
            let (imputed, level) = self.clusters.impute(x, chosen);
            (imputed, Some(level))
        };
        self.policy.update_arm(chosen, x, effective)?;
        Ok(RoundOutcome {
            chosen_arm: chosen,
            revealed,
            effective_reward: Some(effective),
            fallback,
            cluster: slot.cluster(),
        })
    }
}
