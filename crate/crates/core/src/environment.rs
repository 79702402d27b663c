//! Replay of a labeled dataset as a contextual bandit: the reward for a
//! chosen arm is 1 exactly when the arm equals the row's label, and a seeded
//! mask decides which rewards the policy gets to see. The true label is
//! exposed only through [`step`]'s `best_arm` slot, which the harness uses
//! for accuracy accounting; policies never see it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A context matrix plus the true-label column that defines rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditDataset {
    name: String,
    /// Row-major T x d.
    contexts: Vec<f64>,
    labels: Vec<usize>,
    num_arms: usize,
    dim: usize,
}

impl BanditDataset {
    pub fn new(
        name: impl Into<String>,
        contexts: Vec<f64>,
        labels: Vec<usize>,
        num_arms: usize,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if num_arms < 2 {
            return Err(Error::TooFewClasses(num_arms));
        }
        if labels.is_empty() || contexts.len() != labels.len() * dim {
            return Err(Error::InvalidConfig(format!(
                "context matrix size {} does not match {} rows x {} dims",
                contexts.len(),
                labels.len(),
                dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_arms) {
            return Err(Error::InvalidConfig(format!(
                "label {} out of range for {} arms",
                bad, num_arms
            )));
        }
        if contexts.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset contexts",
            });
        }
        Ok(Self {
            name: name.into(),
            contexts,
            labels,
            num_arms,
            dim,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn context(&self, t: usize) -> &[f64] {
        &self.contexts[t * self.dim..(t + 1) * self.dim]
    }

    pub fn label(&self, t: usize) -> usize {
        self.labels[t]
    }

    /// Row permutation, deterministic in `seed`; context/label pairing is
    /// preserved.
    pub fn shuffle(&self, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..self.rows()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        self.reindex(&order)
    }

    /// First `n` rows of a seeded permutation (the whole dataset when
    /// `n >= rows`).
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n >= self.rows() {
            return self.clone();
        }
        let shuffled = self.shuffle(seed);
        let order: Vec<usize> = (0..n).collect();
        shuffled.reindex(&order)
    }

    fn reindex(&self, order: &[usize]) -> Self {
        let mut contexts = Vec::with_capacity(order.len() * self.dim);
        let mut labels = Vec::with_capacity(order.len());
        for &i in order {
            contexts.extend_from_slice(self.context(i));
            labels.push(self.labels[i]);
        }
        Self {
            name: self.name.clone(),
            contexts,
            labels,
            num_arms: self.num_arms,
            dim: self.dim,
        }
    }
}

/// How masked rounds are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Each round hidden independently with probability `missing_rate`.
    #[default]
    Bernoulli,
    /// Exactly `floor(missing_rate * rounds)` rounds hidden, at seeded
    /// positions (variance-reduced comparisons).
    FixedCount,
}

/// Precomputed reveal/hide decision per round.
#[derive(Debug, Clone)]
pub struct MaskSchedule {
    missing_rate: f64,
    reveal: Vec<bool>,
}

impl MaskSchedule {
    pub fn new(missing_rate: f64, seed: u64, rounds: usize, mode: MaskMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&missing_rate) || !missing_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "missing_rate must be in [0, 1], got {}",
                missing_rate
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reveal = match mode {
            MaskMode::Bernoulli => (0..rounds)
                .map(|_| rng.random::<f64>() >= missing_rate)
                .collect(),
            MaskMode::FixedCount => {
                let hidden = (missing_rate * rounds as f64).floor() as usize;
                let mut order: Vec<usize> = (0..rounds).collect();
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
                let mut reveal = vec![true; rounds];
                for &i in order.iter().take(hidden) {
                    reveal[i] = false;
                }
                reveal
            }
        };
        Ok(Self {
            missing_rate,
            reveal,
        })
    }

    pub fn len(&self) -> usize {
        self.reveal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reveal.is_empty()
    }

    pub fn missing_rate(&self) -> f64 {
        self.missing_rate
    }

    pub fn revealed(&self, t: usize) -> bool {
        self.reveal[t]
    }

    /// Fraction of rounds actually hidden.
    pub fn realized_missing_fraction(&self) -> f64 {
        if self.reveal.is_empty() {
            return 0.0;
        }
        self.reveal.iter().filter(|r| !**r).count() as f64 / self.reveal.len() as f64
    }
}

/// One replay step: reward for the chosen arm, whether it is revealed, and
/// the evaluation-only best arm.
pub fn step(
    ds: &BanditDataset,
    mask: &MaskSchedule,
    t: usize,
    chosen_arm: usize,
) -> Result<(f64, bool, usize)> {
    let rounds = ds.rows().min(mask.len());
    if t >= rounds {
        return Err(Error::RoundOutOfRange { t, rounds });
    }
    let best = ds.label(t);
    let reward = if chosen_arm == best { 1.0 } else { 0.0 };
    Ok((reward, mask.revealed(t), best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: Vec<usize>, k: usize) -> BanditDataset {
        let contexts: Vec<f64> = (0..labels.len() * 2).map(|i| i as f64).collect();
        BanditDataset::new("toy", contexts, labels, k, 2).unwrap()
    }

    #[test]
    fn step_reveals_reward_and_best_arm() {
        let ds = toy(vec![2, 1, 0], 3);
        let mask = MaskSchedule::new(0.0, 0, 3, MaskMode::Bernoulli).unwrap();
        assert_eq!(step(&ds, &mask, 0, 2).unwrap(), (1.0, true, 2));
        assert_eq!(step(&ds, &mask, 1, 0).unwrap(), (0.0, true, 1));
    }

    #[test]
    fn step_masked_round() {
        let ds = toy(vec![2, 2], 3);
        let mask = MaskSchedule::new(1.0, 0, 2, MaskMode::Bernoulli).unwrap();
        let (reward, revealed, best) = step(&ds, &mask, 0, 0).unwrap();
        assert_eq!((reward, revealed, best), (0.0, false, 2));
    }

    #[test]
    fn step_rejects_out_of_range() {
        let ds = toy(vec![0, 1], 2);
        let mask = MaskSchedule::new(0.0, 0, 2, MaskMode::Bernoulli).unwrap();
        assert!(matches!(
            step(&ds, &mask, 2, 0),
            Err(Error::RoundOutOfRange { .. })
        ));
    }

    #[test]
    fn mask_zero_rate_reveals_everything() {
        let mask = MaskSchedule::new(0.0, 7, 100, MaskMode::Bernoulli).unwrap();
        assert!((0..100).all(|t| mask.revealed(t)));
        assert_eq!(mask.realized_missing_fraction(), 0.0);
    }

    #[test]
    fn mask_deterministic_given_seed() {
        let a = MaskSchedule::new(0.5, 11, 500, MaskMode::Bernoulli).unwrap();
        let b = MaskSchedule::new(0.5, 11, 500, MaskMode::Bernoulli).unwrap();
        assert_eq!(a.reveal, b.reveal);
    }

    #[test]
    fn mask_empirical_fraction_near_rate() {
        for (p, seed) in [(0.1, 1u64), (0.5, 2), (0.75, 3)] {
            let t = 5000;
            let mask = MaskSchedule::new(p, seed, t, MaskMode::Bernoulli).unwrap();
            let bound = 3.0 * (p * (1.0 - p) / t as f64).sqrt();
            assert!(
                (mask.realized_missing_fraction() - p).abs() <= bound,
                "p={} realized={}",
                p,
                mask.realized_missing_fraction()
            );
        }
    }

    #[test]
    fn mask_fixed_count_is_exact() {
        let mask = MaskSchedule::new(0.3, 5, 1000, MaskMode::FixedCount).unwrap();
        let hidden = (0..1000).filter(|&t| !mask.revealed(t)).count();
        assert_eq!(hidden, 300);
    }

    #[test]
    fn mask_rejects_bad_rate() {
        assert!(MaskSchedule::new(-0.1, 0, 10, MaskMode::Bernoulli).is_err());
        assert!(MaskSchedule::new(1.5, 0, 10, MaskMode::Bernoulli).is_err());
        assert!(MaskSchedule::new(f64::NAN, 0, 10, MaskMode::Bernoulli).is_err());
    }

    #[test]
    fn shuffle_deterministic_and_bijective() {
        let ds = toy(vec![0, 1, 2, 0, 1, 2, 1], 3);
        let a = ds.shuffle(9);
        let b = ds.shuffle(9);
        assert_eq!(a, b);

        let mut orig = ds.labels.clone();
        let mut shuf = a.labels.clone();
        orig.sort_unstable();
        shuf.sort_unstable();
        assert_eq!(orig, shuf, "label multiset preserved");

        // pairing preserved: each shuffled row exists verbatim in the source
        for t in 0..a.rows() {
            let found = (0..ds.rows())
                .any(|s| ds.context(s) == a.context(t) && ds.label(s) == a.label(t));
            assert!(found);
        }
    }

    #[test]
    fn shuffle_single_row_unchanged() {
        let ds = toy(vec![1], 2);
        assert_eq!(ds.shuffle(3), ds);
    }

    #[test]
    fn subsample_takes_n_rows() {
        let ds = toy(vec![0, 1, 2, 0, 1, 2, 1, 0], 3);
        let sub = ds.subsample(3, 4);
        assert_eq!(sub.rows(), 3);
        assert_eq!(ds.subsample(100, 4), ds);
    }

    #[test]
    fn dataset_validation() {
        assert!(BanditDataset::new("x", vec![1.0, 2.0], vec![0, 5], 3, 1).is_err());
        assert!(BanditDataset::new("x", vec![1.0], vec![0], 1, 1).is_err());
        assert!(BanditDataset::new("x", vec![f64::NAN], vec![0], 2, 1).is_err());
        assert!(BanditDataset::new("x", vec![1.0, 2.0, 3.0], vec![0, 1], 2, 1).is_err());
        assert!(BanditDataset::new("x", vec![1.0, 2.0], vec![0, 1], 2, 1).is_ok());
    }

    #[test]
    fn exactly_one_arm_rewarded_per_round() {
        let ds = toy(vec![0, 1, 2], 3);
        let mask = MaskSchedule::new(0.0, 0, 3, MaskMode::Bernoulli).unwrap();
        for t in 0..3 {
            let rewarded: Vec<usize> = (0..3)
                .filter(|&k| step(&ds, &mask, t, k).unwrap().0 == 1.0)
                .collect();
            assert_eq!(rewarded.len(), 1);
            assert_eq!(rewarded[0], ds.label(t));
        }
    }
}
