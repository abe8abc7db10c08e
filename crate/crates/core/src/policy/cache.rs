use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::crf::{CrfInstance, Labeling};
use crate::env::{Action, EpisodeState, Policy};
use crate::error::{Error, Result};

use super::forward::{aggregate, feature_drive, forward, output_row, preactivation};
use super::PolicyParams;

#[derive(Clone, Copy, Debug)]
struct Frame {
    node: usize,
    previous: Option<usize>,
    rows_start: usize,
    values_start: usize,
}

/// Forward-pass state kept in sync with an episode.
///
/// Labeling one node only changes embeddings within `K − 1` hops of it, so
/// [`ScoreCache::apply`] recomputes those rows and nothing else. Rows are
/// recomputed with the same arithmetic as [`forward`], so cached scores are
/// bit-identical to a fresh pass. With journaling on, every apply can be
/// reverted with [`ScoreCache::undo`].
#[derive(Clone, Debug)]
pub struct ScoreCache {
    revision: u64,
    embed_dim: usize,
    num_labels: usize,
    drive: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    scores: Vec<f64>,
    labels: Vec<Option<usize>>,
    stamp: Vec<u32>,
    epoch: u32,
    changed: Vec<usize>,
    journaling: bool,
    frames: Vec<Frame>,
    saved_rows: Vec<(usize, usize)>,
    saved_values: Vec<f64>,
    scratch_agg: Vec<f64>,
    scratch_pre: Vec<f64>,
}

impl ScoreCache {
    pub fn new(params: &PolicyParams, instance: &CrfInstance, labeling: &Labeling) -> Result<Self> {
        let pass = forward(params, instance, labeling)?;
        let p = params.shape.embed_dim;
        let n = instance.num_nodes();
        Ok(Self {
            revision: params.revision,
            embed_dim: p,
            num_labels: instance.num_labels(),
            drive: params.rounds.iter().map(|r| feature_drive(r, instance)).collect(),
            mu: pass.mu,
            scores: pass.scores,
            labels: labeling.as_slice().to_vec(),
            stamp: vec![0; n],
            epoch: 0,
            changed: Vec::new(),
            journaling: false,
            frames: Vec::new(),
            saved_rows: Vec::new(),
            saved_values: Vec::new(),
            scratch_agg: vec![0.0; p],
            scratch_pre: vec![0.0; p],
        })
    }

    /// Enables the undo journal (off by default).
    pub fn with_journal(mut self) -> Self {
        self.journaling = true;
        self
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn node_scores(&self, node: usize) -> &[f64] {
        &self.scores[node * self.num_labels..(node + 1) * self.num_labels]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn embeddings(&self) -> &[f64] {
        self.mu.last().unwrap()
    }

    /// Nodes whose score rows were recomputed by the last apply.
    pub fn changed(&self) -> &[usize] {
        &self.changed
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Labels `node` and refreshes every affected row.
    pub fn apply(&mut self, params: &PolicyParams, instance: &CrfInstance, node: usize, label: usize) -> Result<()> {
        if params.revision != self.revision {
            return Err(Error::Stale("score cache was built with different parameters".into()));
        }
        if self.labels[node].is_some() {
            return Err(Error::contract(format!("node {node} is already labeled")));
        }
        if self.journaling {
            self.frames.push(Frame {
                node,
                previous: self.labels[node],
                rows_start: self.saved_rows.len(),
                values_start: self.saved_values.len(),
            });
        }
        self.labels[node] = Some(label);
        self.refresh_from(params, instance, node);
        Ok(())
    }

    /// Forgets the journal; earlier applies can no longer be undone.
    pub fn commit(&mut self) {
        self.frames.clear();
        self.saved_rows.clear();
        self.saved_values.clear();
    }

    /// Reverts the most recent journaled apply.
    pub fn undo(&mut self) -> Option<usize> {
        let frame = self.frames.pop()?;
        let p = self.embed_dim;
        let l = self.num_labels;
        let mut offset = frame.values_start;
        for &(layer, node) in &self.saved_rows[frame.rows_start..] {
            if layer < self.mu.len() {
                self.mu[layer][node * p..(node + 1) * p].copy_from_slice(&self.saved_values[offset..offset + p]);
                offset += p;
            } else {
                self.scores[node * l..(node + 1) * l].copy_from_slice(&self.saved_values[offset..offset + l]);
                offset += l;
            }
        }
        self.saved_rows.truncate(frame.rows_start);
        self.saved_values.truncate(frame.values_start);
        self.labels[frame.node] = frame.previous;
        Some(frame.node)
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }

    fn refresh_from(&mut self, params: &PolicyParams, instance: &CrfInstance, node: usize) {
        let p = self.embed_dim;
        let l = self.num_labels;
        let rounds = params.rounds.len();
        self.changed.clear();
        if rounds == 0 {
            return;
        }
        let mut layer = vec![node];
        for k in 0..rounds {
            let round = &params.rounds[k];
            for &i in &layer {
                aggregate(instance, i, &self.mu[k], p, &mut self.scratch_agg);
                preactivation(
                    round,
                    &self.drive[k][i * p..(i + 1) * p],
                    self.labels[i],
                    &self.scratch_agg,
                    &mut self.scratch_pre,
                );
                let row = &mut self.mu[k + 1][i * p..(i + 1) * p];
                if self.journaling {
                    self.saved_rows.push((k + 1, i));
                    self.saved_values.extend_from_slice(row);
                }
                for (m, &z) in row.iter_mut().zip(&self.scratch_pre) {
                    *m = z.max(0.0);
                }
            }
            if k + 1 < rounds {
                let epoch = self.next_epoch();
                let mut next = Vec::with_capacity(layer.len() * 4 + 1);
                self.stamp[node] = epoch;
                next.push(node);
                for &i in &layer {
                    for nb in instance.neighbors(i) {
                        if self.stamp[nb.node] != epoch {
                            self.stamp[nb.node] = epoch;
                            next.push(nb.node);
                        }
                    }
                }
                layer = next;
            }
        }
        let last = rounds;
        for &i in &layer {
            let row = &mut self.scores[i * l..(i + 1) * l];
            if self.journaling {
                self.saved_rows.push((last + 1, i));
                self.saved_values.extend_from_slice(row);
            }
            output_row(params, &self.mu[last][i * p..(i + 1) * p], row);
        }
        self.changed = layer;
    }

    /// Highest-scoring free action, lowest `(node, label)` on ties.
    pub fn best_action(&self) -> Option<Action> {
        best_free_action(&self.scores, &self.labels, self.num_labels)
    }
}

/// Full scan for the best free action, lowest `(node, label)` on ties.
pub(crate) fn best_free_action(scores: &[f64], labels: &[Option<usize>], num_labels: usize) -> Option<Action> {
    let mut best: Option<(f64, Action)> = None;
    for (i, lab) in labels.iter().enumerate() {
        if lab.is_some() {
            continue;
        }
        for l in 0..num_labels {
            let s = scores[i * num_labels + l];
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, Action::new(i, l)));
            }
        }
    }
    best.map(|(_, a)| a)
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    score: f64,
    node: usize,
    label: usize,
    version: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.version.cmp(&self.version))
    }
}

/// Greedy inference with the network: at each step take the highest-scoring
/// free `(node, label)`.
///
/// The per-node best scores live in a lazily invalidated max-heap, so a full
/// rollout costs `O(N log N)` on bounded-degree graphs.
pub struct GreedyPolicy<'a> {
    params: &'a PolicyParams,
    cache: Option<ScoreCache>,
    heap: BinaryHeap<HeapEntry>,
    version: Vec<u32>,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(params: &'a PolicyParams) -> Self {
        Self {
            params,
            cache: None,
            heap: BinaryHeap::new(),
            version: Vec::new(),
        }
    }

    pub fn cache(&self) -> Option<&ScoreCache> {
        self.cache.as_ref()
    }

    fn push_node(&mut self, node: usize) {
        let cache = self.cache.as_ref().unwrap();
        let row = cache.node_scores(node);
        let mut label = 0;
        for (l, &s) in row.iter().enumerate().skip(1) {
            if s > row[label] {
                label = l;
            }
        }
        self.heap.push(HeapEntry {
            score: row[label],
            node,
            label,
            version: self.version[node],
        });
    }
}

impl Policy for GreedyPolicy<'_> {
    fn begin(&mut self, instance: &CrfInstance) -> Result<()> {
        let cache = ScoreCache::new(self.params, instance, &Labeling::empty(instance.num_nodes()))?;
        self.cache = Some(cache);
        self.heap.clear();
        self.version = vec![0; instance.num_nodes()];
        for i in 0..instance.num_nodes() {
            self.push_node(i);
        }
        Ok(())
    }

    fn select(&mut self, _instance: &CrfInstance, state: &EpisodeState) -> Result<Action> {
        while let Some(top) = self.heap.peek() {
            if self.version[top.node] == top.version && !state.is_assigned(top.node) {
                return Ok(Action::new(top.node, top.label));
            }
            self.heap.pop();
        }
        Err(Error::contract("no free node left to label"))
    }

    fn advance(&mut self, instance: &CrfInstance, action: Action) -> Result<()> {
        let cache = self
            .cache
            .as_mut()
            .ok_or_else(|| Error::contract("advance called before begin"))?;
        cache.apply(self.params, instance, action.node, action.label)?;
        self.version[action.node] += 1;
        let changed = cache.changed().to_vec();
        for node in changed {
            if node != action.node && self.cache.as_ref().unwrap().labels()[node].is_none() {
                self.version[node] += 1;
                self.push_node(node);
            }
        }
        Ok(())
    }

    fn node_probabilities(&mut self, _instance: &CrfInstance, _state: &EpisodeState) -> Option<Vec<f64>> {
        let cache = self.cache.as_ref()?;
        Some(super::node_probabilities(cache.scores(), cache.labels(), cache.num_labels))
    }
}
