//! Synthetic instances with planted ground truth, the interchange format and
//! labeling metrics.

mod format;
mod generate;

use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Labeling};
use crate::error::{Error, Result};

pub use format::{
    instance_to_string, load_dataset, load_instance, load_instances, parse_dataset, parse_instances, save_dataset,
    save_instance,
};
pub(crate) use generate::entropy;
pub use generate::{generate, InstanceSpec};

/// Instances with their ground truth and a train/validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub items: Vec<(CrfInstance, Labeling)>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Dataset {
    /// Validates that every truth is complete and in range and that the
    /// split indices are in range and disjoint.
    pub fn new(items: Vec<(CrfInstance, Labeling)>, train: Vec<usize>, validation: Vec<usize>) -> Result<Self> {
        for (k, (inst, truth)) in items.iter().enumerate() {
            truth
                .validate(inst)
                .map_err(|e| Error::InvalidInstance(format!("instance {k}: {e}")))?;
            if !truth.is_complete() {
                return Err(Error::InvalidInstance(format!("instance {k}: ground truth is incomplete")));
            }
        }
        let mut seen = vec![false; items.len()];
        for &i in train.iter().chain(&validation) {
            if i >= items.len() {
                return Err(Error::InvalidInstance(format!("split index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInstance(format!("instance {i} appears twice in the split")));
            }
        }
        Ok(Self {
            items,
            train,
            validation,
        })
    }

    /// Everything in the training split.
    pub fn all_train(items: Vec<(CrfInstance, Labeling)>) -> Result<Self> {
        let train = (0..items.len()).collect();
        Self::new(items, train, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn train_items(&self) -> impl Iterator<Item = &(CrfInstance, Labeling)> {
        self.train.iter().map(|&i| &self.items[i])
    }

    pub fn validation_items(&self) -> impl Iterator<Item = &(CrfInstance, Labeling)> {
        self.validation.iter().map(|&i| &self.items[i])
    }
}

/// Recipe for a whole dataset: `count` instances drawn from `instance` with
/// per-instance seeds derived from `instance.seed`; the last
/// `round(count · validation_fraction)` go to validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub instance: InstanceSpec,
    pub count: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

/// Seed of the `index`-th instance of a dataset (splitmix64 finalizer).
pub fn instance_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.validation_fraction) {
        return Err(Error::InvalidConfig("validation_fraction must lie in [0, 1]".into()));
    }
    let items = (0..spec.count)
        .map(|k| {
            generate(&InstanceSpec {
                seed: instance_seed(spec.instance.seed, k),
                ..spec.instance.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_val = (spec.count as f64 * spec.validation_fraction).round() as usize;
    let n_train = spec.count - n_val;
    Dataset::new(items, (0..n_train).collect(), (n_train..spec.count).collect())
}

/// Agreement between a predicted and a true labeling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub mean_iou: f64,
}

/// Accuracy and mean IoU over the labels present in either labeling.
pub fn score(prediction: &Labeling, truth: &Labeling) -> Result<Metrics> {
    if prediction.len() != truth.len() {
        return Err(Error::contract(format!(
            "prediction has {} nodes, truth has {}",
            prediction.len(),
            truth.len()
        )));
    }
    let pred = prediction.to_complete()?;
    let tru = truth.to_complete()?;
    score_labels(&pred, &tru)
}

pub fn score_labels(pred: &[usize], truth: &[usize]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::contract(format!(
            "prediction has {} nodes, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Ok(Metrics {
            accuracy: 1.0,
            mean_iou: 1.0,
        });
    }
    let labels = pred.iter().chain(truth).copied().max().unwrap_or(0) + 1;
    let mut inter = vec![0usize; labels];
    let mut union = vec![0usize; labels];
    let mut hits = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            hits += 1;
            inter[p] += 1;
            union[p] += 1;
        } else {
            union[p] += 1;
            union[t] += 1;
        }
    }
    let present: Vec<f64> = (0..labels)
        .filter(|&l| union[l] > 0)
        .map(|l| inter[l] as f64 / union[l] as f64)
        .collect();
    Ok(Metrics {
        accuracy: hits as f64 / pred.len() as f64,
        mean_iou: present.iter().sum::<f64>() / present.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let m = score_labels(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert!((m.mean_iou - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);

        let m = score_labels(&[2, 1, 0], &[2, 1, 0]).unwrap();
        assert_eq!((m.accuracy, m.mean_iou), (1.0, 1.0));

        let m = score_labels(&[0, 0], &[1, 1]).unwrap();
        assert_eq!((m.accuracy, m.mean_iou), (0.0, 0.0));

        assert!(score_labels(&[0], &[0, 1]).is_err());
        assert!(score(&Labeling::empty(2), &Labeling::from_labels(&[0, 1])).is_err());
    }

    #[test]
    fn dataset_generation_is_deterministic_and_split() {
        let spec = DatasetSpec {
            instance: InstanceSpec {
                seed: 4,
                ..InstanceSpec::default()
            },
            count: 10,
            validation_fraction: 0.3,
        };
        let a = generate_dataset(&spec).unwrap();
        assert_eq!(a, generate_dataset(&spec).unwrap());
        assert_eq!(a.train, (0..7).collect::<Vec<_>>());
        assert_eq!(a.validation, vec![7, 8, 9]);
        assert_ne!(a.items[0].0, a.items[1].0);
    }

    #[test]
    fn split_validation() {
        let (inst, truth) = generate(&InstanceSpec::default()).unwrap();
        let items = vec![(inst.clone(), truth.clone()), (inst, truth)];
        assert!(Dataset::new(items.clone(), vec![0, 2], vec![]).is_err());
        assert!(Dataset::new(items.clone(), vec![0], vec![0]).is_err());
        assert!(Dataset::new(items, vec![0], vec![1]).is_ok());
    }
}
