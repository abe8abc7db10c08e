//! Pieces shared by the DQN and MCTS trainers: the epoch log, the
//! exploitation schedule and greedy evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crf::{total_energy, CrfInstance, Labeling};
use crate::env::rollout;
use crate::error::{Error, Result};
use crate::instances::{score, Dataset};
use crate::policy::{GreedyPolicy, OptimizerState, PolicyParams, PolicyShape};

/// One record per training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLog {
    pub epoch: usize,
    pub episodes: usize,
    pub updates: usize,
    /// Optimizer step counter after the epoch (continues across resumes).
    pub optimizer_step: u64,
    pub loss_mean: f64,
    pub loss_var: f64,
    /// Mean final energy of the training episodes.
    pub episode_energy: f64,
    /// Mean accuracy of the training episodes against ground truth.
    pub episode_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Mean absolute TD error of the sampled batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_abs_mean: Option<f64>,
    /// Mean entropy of the root search policy per move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_entropy: Option<f64>,
    /// Greedy rollout energy on the validation split, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_accuracy: Option<f64>,
}

/// Result of a training run. Wall-clock seconds per epoch are kept apart from
/// the log so the log itself is reproducible.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub optimizer: OptimizerState,
    pub log: Vec<EpochLog>,
    pub epoch_seconds: Vec<f64>,
}

/// Linear ramp from `start` to `end` over `steps` episodes, then flat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Ramp {
    pub fn at(&self, step: usize) -> f64 {
        if self.steps == 0 || step >= self.steps {
            self.end
        } else {
            self.start + (self.end - self.start) * step as f64 / self.steps as f64
        }
    }
}

/// Greedy rollout of the network on one instance.
pub fn greedy_labeling(params: &PolicyParams, instance: &CrfInstance) -> Result<Labeling> {
    rollout(instance, &mut GreedyPolicy::new(params))
}

/// Mean greedy energy and accuracy over the items.
pub fn evaluate_greedy<'a>(
    params: &PolicyParams,
    items: impl Iterator<Item = &'a (CrfInstance, Labeling)>,
) -> Result<Option<(f64, f64)>> {
    let (mut e, mut a, mut n) = (0.0, 0.0, 0usize);
    for (inst, truth) in items {
        let lab = greedy_labeling(params, inst)?;
        e += total_energy(inst, &lab)?;
        a += score(&lab, truth)?.accuracy;
        n += 1;
    }
    Ok((n > 0).then(|| (e / n as f64, a / n as f64)))
}

/// Shape shared by every instance of the dataset.
pub(crate) fn dataset_shape(dataset: &Dataset, rounds: usize, embed_dim: usize) -> Result<PolicyShape> {
    let mut train = dataset.train_items();
    let (first, _) = train
        .next()
        .ok_or_else(|| Error::InvalidConfig("training split is empty".into()))?;
    let shape = PolicyShape::for_instance(first, rounds, embed_dim);
    for (inst, _) in dataset.items.iter() {
        if PolicyShape::for_instance(inst, rounds, embed_dim) != shape {
            return Err(Error::Shape("dataset instances differ in feature or label dimension".into()));
        }
    }
    Ok(shape)
}

pub(crate) fn mean_var(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Fisher-Yates order of `0..n`.
pub(crate) fn shuffled<R: Rng>(rng: &mut R, items: &[usize]) -> Vec<usize> {
    let mut v = items.to_vec();
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
    v
}

/// Index of a maximum of `values` over the entries where `legal` holds,
/// ties broken uniformly at random.
pub(crate) fn random_argmax<R: Rng>(values: &[f64], legal: impl Fn(usize) -> bool, rng: &mut R) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        if !legal(k) {
            continue;
        }
        if v > best || ties.is_empty() {
            best = v;
            ties.clear();
            ties.push(k);
        } else if v == best {
            ties.push(k);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        n => Some(ties[rng.random_range(0..n)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ramp_endpoints() {
        let r = Ramp {
            start: 0.3,
            end: 0.95,
            steps: 10,
        };
        assert_eq!(r.at(0), 0.3);
        assert!((r.at(5) - 0.625).abs() < 1e-12);
        assert_eq!(r.at(10), 0.95);
        assert_eq!(r.at(100), 0.95);
    }

    #[test]
    fn random_argmax_spreads_over_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = [1.0, 3.0, 3.0, 2.0, 3.0];
        let mut hits = [0; 5];
        for _ in 0..3000 {
            hits[random_argmax(&v, |k| k != 4, &mut rng).unwrap()] += 1;
        }
        assert_eq!((hits[0], hits[3], hits[4]), (0, 0, 0));
        assert!(hits[1] > 1300 && hits[2] > 1300);
        assert_eq!(random_argmax(&v, |_| false, &mut rng), None);
    }

    #[test]
    fn mean_var_basic() {
        assert_eq!(mean_var(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_var(&[]), (0.0, 0.0));
    }
}
