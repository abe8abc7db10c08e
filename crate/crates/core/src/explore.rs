//! Exploration heuristics shared by both trainers.
//!
//! * `M1`: share of a node's neighbors that are still unlabeled.
//! * `M2`: softmax over free nodes of the negative unary entropy.
//! * `M3`: 1 when the label is a majority label among the node's labeled
//!   clique-mates, else 0.

use serde::{Deserialize, Serialize};

use crate::crf::{softmax, CrfInstance, Labeling};
use crate::instances::entropy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    Adjacency,
    Confidence,
    Clique,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Adjacency, Heuristic::Confidence, Heuristic::Clique];
}

/// Entropy of the unary distribution `softmax(−f_i)` of every node.
pub fn unary_entropies(instance: &CrfInstance) -> Vec<f64> {
    (0..instance.num_nodes())
        .map(|i| {
            let neg: Vec<f64> = instance.unary(i).iter().map(|f| -f).collect();
            entropy(&softmax(&neg))
        })
        .collect()
}

/// `M1` of any action on `node`. Isolated nodes score 0.
pub fn m1(instance: &CrfInstance, labeling: &Labeling, node: usize) -> f64 {
    let nbrs = instance.neighbors(node);
    if nbrs.is_empty() {
        return 0.0;
    }
    let free = nbrs.iter().filter(|n| labeling.get(n.node).is_none()).count();
    free as f64 / nbrs.len() as f64
}

/// `M2` per node; labeled nodes get 0 and free nodes sum to 1.
pub fn m2(entropies: &[f64], labeling: &Labeling) -> Vec<f64> {
    let free: Vec<usize> = (0..labeling.len()).filter(|&i| labeling.get(i).is_none()).collect();
    let mut out = vec![0.0; labeling.len()];
    let logits: Vec<f64> = free.iter().map(|&i| -entropies[i]).collect();
    for (&i, p) in free.iter().zip(softmax(&logits)) {
        out[i] = p;
    }
    out
}

/// Label counts over the distinct labeled nodes sharing a clique with `node`.
pub fn clique_mate_counts(instance: &CrfInstance, labeling: &Labeling, node: usize) -> Vec<usize> {
    let mut counts = vec![0; instance.num_labels()];
    let mut mates: Vec<usize> = instance
        .hop1_of(node)
        .iter()
        .flat_map(|&c| instance.hop1()[c].members.iter().copied())
        .chain(
            instance
                .hop2_of(node)
                .iter()
                .flat_map(|&c| instance.hop2()[c].members.iter().copied()),
        )
        .filter(|&j| j != node)
        .collect();
    mates.sort_unstable();
    mates.dedup();
    for j in mates {
        if let Some(y) = labeling.get(j) {
            counts[y] += 1;
        }
    }
    counts
}

/// `M3` for labeling `node` with `label`. Every label tied for the maximum
/// count scores 1; with no labeled clique-mates nothing does.
pub fn m3(instance: &CrfInstance, labeling: &Labeling, node: usize, label: usize) -> f64 {
    majority_row(&clique_mate_counts(instance, labeling, node))[label]
}

fn majority_row(counts: &[usize]) -> Vec<f64> {
    let best = counts.iter().copied().max().unwrap_or(0);
    counts
        .iter()
        .map(|&c| if best > 0 && c == best { 1.0 } else { 0.0 })
        .collect()
}

/// One heuristic evaluated on every action, flat `N × |L|`. Rows of labeled
/// nodes are 0; callers mask legality themselves.
pub fn heuristic_scores(instance: &CrfInstance, labeling: &Labeling, entropies: &[f64], which: Heuristic) -> Vec<f64> {
    let (n, l) = (instance.num_nodes(), instance.num_labels());
    let mut out = vec![0.0; n * l];
    match which {
        Heuristic::Adjacency => {
            for i in (0..n).filter(|&i| labeling.get(i).is_none()) {
                out[i * l..(i + 1) * l].fill(m1(instance, labeling, i));
            }
        }
        Heuristic::Confidence => {
            for (i, p) in m2(entropies, labeling).into_iter().enumerate() {
                out[i * l..(i + 1) * l].fill(p);
            }
        }
        Heuristic::Clique => {
            for i in (0..n).filter(|&i| labeling.get(i).is_none()) {
                let row = majority_row(&clique_mate_counts(instance, labeling, i));
                out[i * l..(i + 1) * l].copy_from_slice(&row);
            }
        }
    }
    out
}

/// All three heuristics at once.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationScores {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    num_labels: usize,
}

impl ExplorationScores {
    pub fn get(&self, which: Heuristic) -> &[f64] {
        match which {
            Heuristic::Adjacency => &self.m1,
            Heuristic::Confidence => &self.m2,
            Heuristic::Clique => &self.m3,
        }
    }

    pub fn score(&self, which: Heuristic, node: usize, label: usize) -> f64 {
        self.get(which)[node * self.num_labels + label]
    }
}

pub fn exploration_scores(instance: &CrfInstance, labeling: &Labeling) -> ExplorationScores {
    let entropies = unary_entropies(instance);
    ExplorationScores {
        m1: heuristic_scores(instance, labeling, &entropies, Heuristic::Adjacency),
        m2: heuristic_scores(instance, labeling, &entropies, Heuristic::Confidence),
        m3: heuristic_scores(instance, labeling, &entropies, Heuristic::Clique),
        num_labels: instance.num_labels(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{Hop1Clique, InstanceParts, PairwiseGate};

    fn path_instance(n: usize, unary: Vec<Vec<f64>>, hop1: Vec<Hop1Clique>) -> CrfInstance {
        CrfInstance::new(InstanceParts {
            num_labels: unary[0].len(),
            edges: (1..n).map(|i| (i - 1, i)).collect(),
            node_features: vec![vec![0.0]; n],
            hypercolumns: vec![vec![1.0]; n],
            unary,
            gate: PairwiseGate { alpha: 0.0, beta: 0.0 },
            hop1,
            hop2: vec![],
        })
        .unwrap()
    }

    #[test]
    fn m1_counts_unlabeled_neighbors() {
        let inst = path_instance(3, vec![vec![0.0, 1.0]; 3], vec![]);
        let mut lab = Labeling::empty(3);
        assert_eq!(m1(&inst, &lab, 1), 1.0);
        lab.set(0, 0);
        assert_eq!(m1(&inst, &lab, 1), 0.5);
        assert_eq!(m1(&inst, &lab, 2), 1.0);
        let single = path_instance(1, vec![vec![0.0, 1.0]], vec![]);
        assert_eq!(m1(&single, &Labeling::empty(1), 0), 0.0);
    }

    #[test]
    fn m2_uniform_when_entropies_equal() {
        let inst = path_instance(4, vec![vec![0.5, 0.5]; 4], vec![]);
        let mut lab = Labeling::empty(4);
        lab.set(2, 1);
        let p = m2(&unary_entropies(&inst), &lab);
        assert_eq!(p, vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn m2_prefers_confident_nodes() {
        let inst = path_instance(2, vec![vec![0.0, 5.0], vec![0.7, 0.7]], vec![]);
        let p = m2(&unary_entropies(&inst), &Labeling::empty(2));
        assert!(p[0] > p[1]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn m3_majority_of_labeled_mates() {
        let clique = Hop1Clique {
            members: vec![0, 1, 2, 3],
            label: 0,
            confidence: 1.0,
            weight: 1.0,
        };
        let inst = path_instance(4, vec![vec![0.0, 0.0, 0.0]; 4], vec![clique]);
        let lab = Labeling::from_options(vec![Some(1), Some(1), Some(2), None]);
        assert_eq!(m3(&inst, &lab, 3, 1), 1.0);
        assert_eq!(m3(&inst, &lab, 3, 2), 0.0);
        assert_eq!(m3(&inst, &lab, 3, 0), 0.0);
        assert_eq!(m3(&inst, &Labeling::empty(4), 3, 0), 0.0);
        let tie = Labeling::from_options(vec![Some(1), Some(2), None, None]);
        assert_eq!(m3(&inst, &tie, 3, 1), 1.0);
        assert_eq!(m3(&inst, &tie, 3, 2), 1.0);
    }

    #[test]
    fn combined_scores_match_single_evaluations() {
        let clique = Hop1Clique {
            members: vec![0, 2],
            label: 1,
            confidence: 1.0,
            weight: 1.0,
        };
        let inst = path_instance(3, vec![vec![0.1, 2.0], vec![1.0, 1.0], vec![0.3, 0.2]], vec![clique]);
        let lab = Labeling::from_options(vec![Some(1), None, None]);
        let s = exploration_scores(&inst, &lab);
        let ent = unary_entropies(&inst);
        let m2v = m2(&ent, &lab);
        for (i, &conf) in m2v.iter().enumerate().skip(1) {
            for y in 0..2 {
                assert_eq!(s.score(Heuristic::Adjacency, i, y), m1(&inst, &lab, i));
                assert_eq!(s.score(Heuristic::Confidence, i, y), conf);
                assert_eq!(s.score(Heuristic::Clique, i, y), m3(&inst, &lab, i, y));
            }
        }
        assert_eq!(s.score(Heuristic::Clique, 2, 1), 1.0);
    }
}
