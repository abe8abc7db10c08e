//! Graph embedding policy network.
//!
//! Every node carries a `p`-dimensional embedding, refined over `K`
//! synchronous message-passing rounds:
//!
//! ```text
//! μ_i⁽ᵏ⁺¹⁾ = relu(θ1⁽ᵏ⁾ h_i + θ2⁽ᵏ⁾ ỹ_i + θ3⁽ᵏ⁾ b_i + θ4⁽ᵏ⁾ Σ_j w(i,j) μ_j⁽ᵏ⁾)
//! π_i     = θ5 μ_i⁽ᴷ⁾
//! ```
//!
//! with `μ⁽⁰⁾ = 0`, `h_i` the labeled tag, `ỹ_i` the one-hot label and `b_i`
//! the node features. Row `i` of the output scores the `|L|` labels of node
//! `i`; the trainers read it either as Q-values or as softmax logits.

mod adam;
mod cache;
mod forward;
mod io;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::CrfInstance;
use crate::error::{Error, Result};

pub use adam::{adam_update, AdamConfig, OptimizerState};
pub use cache::{GreedyPolicy, ScoreCache};
pub use forward::{backward, forward, ForwardPass, NodeEncoding};
pub use io::{load_params, save_params, ParamsFile, PARAMS_FORMAT, PARAMS_VERSION};

/// Architecture hyperparameters plus the instance dimensions they bind to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    /// Message-passing rounds `K`.
    pub rounds: usize,
    /// Embedding dimension `p`.
    pub embed_dim: usize,
    pub num_features: usize,
    pub num_labels: usize,
}

impl PolicyShape {
    pub fn for_instance(instance: &CrfInstance, rounds: usize, embed_dim: usize) -> Self {
        Self {
            rounds,
            embed_dim,
            num_features: instance.num_features(),
            num_labels: instance.num_labels(),
        }
    }
}

/// Weights of one message-passing round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundParams {
    /// θ1, `p`: drive from the labeled tag.
    pub tag: Array1<f64>,
    /// θ2, `p × |L|`: drive from the one-hot label.
    pub label: Array2<f64>,
    /// θ3, `p × F`: drive from node features.
    pub features: Array2<f64>,
    /// θ4, `p × p`: drive from the weighted neighbor aggregate.
    pub neighbors: Array2<f64>,
}

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Network parameters. Every mutable access stamps a new revision, which
/// lets a backward pass detect intermediates from older weights.
#[derive(Clone, Debug)]
pub struct PolicyParams {
    rounds: Vec<RoundParams>,
    /// θ5, `|L| × p`.
    output: Array2<f64>,
    shape: PolicyShape,
    revision: u64,
}

impl PartialEq for PolicyParams {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.rounds == other.rounds && self.output == other.output
    }
}

impl PolicyParams {
    pub fn zeros(shape: PolicyShape) -> Self {
        let p = shape.embed_dim;
        let rounds = (0..shape.rounds)
            .map(|_| RoundParams {
                tag: Array1::zeros(p),
                label: Array2::zeros((p, shape.num_labels)),
                features: Array2::zeros((p, shape.num_features)),
                neighbors: Array2::zeros((p, p)),
            })
            .collect();
        Self {
            rounds,
            output: Array2::zeros((shape.num_labels, p)),
            shape,
            revision: fresh_revision(),
        }
    }

    /// Uniform initialization in `[−1/√p, 1/√p]`.
    pub fn init(shape: PolicyShape, seed: u64) -> Self {
        let mut params = Self::zeros(shape);
        let bound = 1.0 / (shape.embed_dim.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, values) in params.tensors_mut() {
            for v in values {
                *v = rng.random_range(-bound..=bound);
            }
        }
        params
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    pub fn rounds(&self) -> &[RoundParams] {
        &self.rounds
    }

    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::with_capacity(4 * self.rounds.len() + 1);
        for (k, r) in self.rounds.iter().enumerate() {
            out.push((format!("round{k}.tag"), r.tag.shape().to_vec(), r.tag.as_slice().unwrap()));
            out.push((format!("round{k}.label"), r.label.shape().to_vec(), r.label.as_slice().unwrap()));
            out.push((
                format!("round{k}.features"),
                r.features.shape().to_vec(),
                r.features.as_slice().unwrap(),
            ));
            out.push((
                format!("round{k}.neighbors"),
                r.neighbors.shape().to_vec(),
                r.neighbors.as_slice().unwrap(),
            ));
        }
        out.push(("output".into(), self.output.shape().to_vec(), self.output.as_slice().unwrap()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.revision = fresh_revision();
        let mut out = Vec::with_capacity(4 * self.rounds.len() + 1);
        for (k, r) in self.rounds.iter_mut().enumerate() {
            out.push((format!("round{k}.tag"), r.tag.as_slice_mut().unwrap()));
            out.push((format!("round{k}.label"), r.label.as_slice_mut().unwrap()));
            out.push((format!("round{k}.features"), r.features.as_slice_mut().unwrap()));
            out.push((format!("round{k}.neighbors"), r.neighbors.as_slice_mut().unwrap()));
        }
        out.push(("output".into(), self.output.as_slice_mut().unwrap()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Adds `scale · other` to every tensor.
    pub fn add_scaled(&mut self, other: &PolicyParams, scale: f64) {
        let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();
        for ((_, dst), src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    /// Errors unless the network was built for this instance's feature and
    /// label dimensions.
    pub fn check_compatible(&self, instance: &CrfInstance) -> Result<()> {
        if self.shape.num_features != instance.num_features() {
            return Err(Error::Shape(format!(
                "policy expects {} node features, instance has {}",
                self.shape.num_features,
                instance.num_features()
            )));
        }
        if self.shape.num_labels != instance.num_labels() {
            return Err(Error::Shape(format!(
                "policy expects {} labels, instance has {}",
                self.shape.num_labels,
                instance.num_labels()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> std::result::Result<(), String> {
        for (name, _, values) in self.tensors() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(name);
            }
        }
        Ok(())
    }
}

/// Softmax of `scores` restricted to the free nodes of `labels`, returned as
/// a flat `N × |L|` table with zeros on labeled rows.
pub fn legal_softmax(scores: &[f64], labels: &[Option<usize>], num_labels: usize) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for (i, l) in labels.iter().enumerate() {
        if l.is_none() {
            for &s in &scores[i * num_labels..(i + 1) * num_labels] {
                max = max.max(s);
            }
        }
    }
    let mut out = vec![0.0; scores.len()];
    if max == f64::NEG_INFINITY {
        return out;
    }
    let mut z = 0.0;
    for (i, l) in labels.iter().enumerate() {
        if l.is_none() {
            for k in i * num_labels..(i + 1) * num_labels {
                let e = (scores[k] - max).exp();
                out[k] = e;
                z += e;
            }
        }
    }
    for v in &mut out {
        *v /= z;
    }
    out
}

/// Per-node selection probability: the action softmax summed over labels.
pub fn node_probabilities(scores: &[f64], labels: &[Option<usize>], num_labels: usize) -> Vec<f64> {
    legal_softmax(scores, labels, num_labels)
        .chunks(num_labels)
        .map(|row| row.iter().sum())
        .collect()
}
