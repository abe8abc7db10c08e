//! CRF instances and their energies.
//!
//! The energy of a labeling is the sum of per-node unaries, a gated Potts term
//! on every edge and two families of detection-style higher-order terms:
//!
//! * HOP1 cliques reward agreement with a detection label. The detection
//!   validity switch is minimized out, so a clique with `k` of `n` members
//!   carrying the detection label costs `w·c·min(k, n − k)`.
//! * HOP2 cliques charge a flat penalty when fewer than `n / C` members carry
//!   the target label.
//!
//! Partial labelings only count the terms whose variables are all assigned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detection clique with an auxiliary validity variable (minimized out).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hop1Clique {
    pub members: Vec<usize>,
    pub label: usize,
    pub confidence: f64,
    pub weight: f64,
}

impl Hop1Clique {
    pub fn scale(&self) -> f64 {
        self.weight * self.confidence
    }

    /// Energy given the number of members labeled with the clique label.
    pub fn energy_from_hits(&self, hits: usize) -> f64 {
        let misses = self.members.len() - hits;
        self.scale() * hits.min(misses) as f64
    }

    /// Energy of the validity-switch expansion `f(y, z)` for a fixed `z`.
    pub fn energy_with_switch(&self, hits: usize, valid: bool) -> f64 {
        let misses = self.members.len() - hits;
        if valid {
            self.scale() * misses as f64
        } else {
            self.scale() * hits as f64
        }
    }

    pub fn energy(&self, labeling: &Labeling) -> Result<f64> {
        Ok(self.energy_from_hits(count_hits(&self.members, self.label, labeling)?))
    }
}

/// Count-threshold clique: penalty unless at least `|members| / divisor`
/// members carry `label`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hop2Clique {
    pub members: Vec<usize>,
    pub label: usize,
    pub penalty: f64,
    pub divisor: f64,
}

impl Hop2Clique {
    pub fn threshold(&self) -> f64 {
        self.members.len() as f64 / self.divisor
    }

    pub fn energy_from_hits(&self, hits: usize) -> f64 {
        if (hits as f64) < self.threshold() {
            self.penalty
        } else {
            0.0
        }
    }

    pub fn energy(&self, labeling: &Labeling) -> Result<f64> {
        Ok(self.energy_from_hits(count_hits(&self.members, self.label, labeling)?))
    }
}

fn count_hits(members: &[usize], label: usize, labeling: &Labeling) -> Result<usize> {
    let mut hits = 0;
    for &m in members {
        match labeling.get(m) {
            Some(y) if y == label => hits += 1,
            Some(_) => {}
            None => {
                return Err(Error::contract(format!(
                    "clique member {m} is unassigned"
                )))
            }
        }
    }
    Ok(hits)
}

/// Pairwise Potts gate: differing labels on an edge cost `alpha` when the
/// hypercolumn similarity `|g_i·g_j|` is below `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseGate {
    pub alpha: f64,
    pub beta: f64,
}

/// Plain-data form of an instance: what gets validated, serialized and
/// compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParts {
    pub num_labels: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_features: Vec<Vec<f64>>,
    pub hypercolumns: Vec<Vec<f64>>,
    pub unary: Vec<Vec<f64>>,
    pub gate: PairwiseGate,
    pub hop1: Vec<Hop1Clique>,
    pub hop2: Vec<Hop2Clique>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// Which potential families take part in the energy. Used for the per-column
/// evaluation tables and for ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialMask {
    pub pairwise: bool,
    pub hop1: bool,
    pub hop2: bool,
}

impl PotentialMask {
    pub const ALL: PotentialMask = PotentialMask {
        pairwise: true,
        hop1: true,
        hop2: true,
    };

    /// The four cumulative columns: U, U+P, U+P+HOP1, U+P+HOP1+HOP2.
    pub const COLUMNS: [(&'static str, PotentialMask); 4] = [
        (
            "U",
            PotentialMask {
                pairwise: false,
                hop1: false,
                hop2: false,
            },
        ),
        (
            "U+P",
            PotentialMask {
                pairwise: true,
                hop1: false,
                hop2: false,
            },
        ),
        (
            "U+P+HOP1",
            PotentialMask {
                pairwise: true,
                hop1: true,
                hop2: false,
            },
        ),
        ("U+P+HOP1+HOP2", PotentialMask::ALL),
    ];
}

/// A validated CRF instance. Immutable once built.
#[derive(Clone, Debug)]
pub struct CrfInstance {
    parts: InstanceParts,
    adjacency: Vec<Vec<Neighbor>>,
    edge_similarity: Vec<f64>,
    weights: Vec<Vec<f64>>,
    hop1_of: Vec<Vec<usize>>,
    hop2_of: Vec<Vec<usize>>,
}

impl PartialEq for CrfInstance {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

impl CrfInstance {
    pub fn new(mut parts: InstanceParts) -> Result<Self> {
        let n = parts.unary.len();
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if parts.num_labels == 0 {
            return bad("num_labels must be at least 1".into());
        }
        if parts.node_features.len() != n || parts.hypercolumns.len() != n {
            return bad(format!(
                "per-node tables disagree on node count: unary {n}, features {}, hypercolumns {}",
                parts.node_features.len(),
                parts.hypercolumns.len()
            ));
        }
        check_rows("unary", &parts.unary, Some(parts.num_labels))?;
        let f = parts.node_features.first().map_or(0, Vec::len);
        check_rows("node_features", &parts.node_features, Some(f))?;
        let g = parts.hypercolumns.first().map_or(0, Vec::len);
        check_rows("hypercolumns", &parts.hypercolumns, Some(g))?;
        if !parts.gate.alpha.is_finite() || !parts.gate.beta.is_finite() {
            return bad("pairwise gate parameters must be finite".into());
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for (e, pair) in parts.edges.iter_mut().enumerate() {
            let (a, b) = (pair.0.min(pair.1), pair.0.max(pair.1));
            if b >= n {
                return bad(format!("edge {e} endpoint {b} out of range (N = {n})"));
            }
            if a == b {
                return bad(format!("edge {e} is a self-loop on node {a}"));
            }
            if !seen.insert((a, b)) {
                return bad(format!("edge ({a}, {b}) listed twice"));
            }
            *pair = (a, b);
            adjacency[a].push(Neighbor { node: b, edge: e });
            adjacency[b].push(Neighbor { node: a, edge: e });
        }

        let mut hop1_of = vec![Vec::new(); n];
        for (c, clique) in parts.hop1.iter().enumerate() {
            check_members("hop1", c, &clique.members, n)?;
            if clique.label >= parts.num_labels {
                return bad(format!("hop1 clique {c} label {} out of range", clique.label));
            }
            if !(clique.confidence > 0.0 && clique.confidence <= 1.0) {
                return bad(format!("hop1 clique {c} confidence must lie in (0, 1]"));
            }
            if !(clique.weight >= 0.0 && clique.weight.is_finite()) {
                return bad(format!("hop1 clique {c} weight must be finite and >= 0"));
            }
            for &m in &clique.members {
                hop1_of[m].push(c);
            }
        }
        let mut hop2_of = vec![Vec::new(); n];
        for (c, clique) in parts.hop2.iter().enumerate() {
            check_members("hop2", c, &clique.members, n)?;
            if clique.label >= parts.num_labels {
                return bad(format!("hop2 clique {c} label {} out of range", clique.label));
            }
            if !(clique.penalty >= 0.0 && clique.penalty.is_finite()) {
                return bad(format!("hop2 clique {c} penalty must be finite and >= 0"));
            }
            if !(clique.divisor > 1.0 && clique.divisor.is_finite()) {
                return bad(format!("hop2 clique {c} divisor must be finite and > 1"));
            }
            for &m in &clique.members {
                hop2_of[m].push(c);
            }
        }

        let edge_similarity: Vec<f64> = parts
            .edges
            .iter()
            .map(|&(a, b)| dot(&parts.hypercolumns[a], &parts.hypercolumns[b]).abs())
            .collect();
        let weights = adjacency
            .iter()
            .map(|row| {
                let sims: Vec<f64> = row.iter().map(|nb| edge_similarity[nb.edge]).collect();
                softmax(&sims)
            })
            .collect();

        Ok(Self {
            parts,
            adjacency,
            edge_similarity,
            weights,
            hop1_of,
            hop2_of,
        })
    }

    pub fn parts(&self) -> &InstanceParts {
        &self.parts
    }

    pub fn into_parts(self) -> InstanceParts {
        self.parts
    }

    pub fn num_nodes(&self) -> usize {
        self.parts.unary.len()
    }

    pub fn num_labels(&self) -> usize {
        self.parts.num_labels
    }

    pub fn num_features(&self) -> usize {
        self.parts.node_features.first().map_or(0, Vec::len)
    }

    pub fn hypercolumn_dim(&self) -> usize {
        self.parts.hypercolumns.first().map_or(0, Vec::len)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.parts.edges
    }

    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[node]
    }

    /// Softmax-normalized edge weights `w(node, ·)`, aligned with
    /// [`CrfInstance::neighbors`].
    pub fn weight_row(&self, node: usize) -> &[f64] {
        &self.weights[node]
    }

    /// Unnormalized edge weight `|g_i·g_j|`.
    pub fn edge_similarity(&self, edge: usize) -> f64 {
        self.edge_similarity[edge]
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        &self.parts.unary[node]
    }

    pub fn features(&self, node: usize) -> &[f64] {
        &self.parts.node_features[node]
    }

    pub fn gate(&self) -> PairwiseGate {
        self.parts.gate
    }

    pub fn hop1(&self) -> &[Hop1Clique] {
        &self.parts.hop1
    }

    pub fn hop2(&self) -> &[Hop2Clique] {
        &self.parts.hop2
    }

    /// HOP1 cliques containing `node`.
    pub fn hop1_of(&self, node: usize) -> &[usize] {
        &self.hop1_of[node]
    }

    pub fn hop2_of(&self, node: usize) -> &[usize] {
        &self.hop2_of[node]
    }

    /// Potts value of edge `edge` for the given endpoint labels.
    #[inline]
    pub fn edge_energy(&self, edge: usize, a: usize, b: usize) -> f64 {
        if a != b && self.edge_similarity[edge] < self.parts.gate.beta {
            self.parts.gate.alpha
        } else {
            0.0
        }
    }

    pub fn find_edge(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency
            .get(i)?
            .iter()
            .find(|nb| nb.node == j)
            .map(|nb| nb.edge)
    }

    /// Copy of the instance with the disabled potential families removed.
    /// Masking the pairwise family keeps the graph (the policy network still
    /// needs it) and zeroes the Potts penalty.
    pub fn masked(&self, mask: PotentialMask) -> CrfInstance {
        let mut parts = self.parts.clone();
        if !mask.pairwise {
            parts.gate.alpha = 0.0;
        }
        if !mask.hop1 {
            parts.hop1.clear();
        }
        if !mask.hop2 {
            parts.hop2.clear();
        }
        CrfInstance::new(parts).expect("masking preserves validity")
    }

    /// Per-node unary argmin, lowest label on ties.
    pub fn unary_argmin(&self) -> Vec<usize> {
        self.parts.unary.iter().map(|row| argmin(row)).collect()
    }
}

fn check_rows(name: &str, rows: &[Vec<f64>], width: Option<usize>) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::InvalidInstance(format!(
                    "{name} row {i} has length {}, expected {w}",
                    row.len()
                )));
            }
        }
        if let Some(k) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "{name} row {i} entry {k} is not finite"
            )));
        }
    }
    Ok(())
}

fn check_members(kind: &str, c: usize, members: &[usize], n: usize) -> Result<()> {
    if members.is_empty() {
        return Err(Error::InvalidInstance(format!("{kind} clique {c} has no members")));
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    if let Some(&m) = sorted.last() {
        if m >= n {
            return Err(Error::InvalidInstance(format!(
                "{kind} clique {c} member {m} out of range (N = {n})"
            )));
        }
    }
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInstance(format!(
            "{kind} clique {c} lists a member twice"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let Some(max) = xs.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the smallest entry, lowest index on ties.
pub(crate) fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = k;
        }
    }
    best
}

/// Directed edge weights `w(i, j)`: for every node, a softmax of `|g_i·g_j|`
/// over its neighbors. Isolated nodes get an empty row.
pub fn edge_weights(instance: &CrfInstance) -> Vec<Vec<(usize, f64)>> {
    (0..instance.num_nodes())
        .map(|i| {
            instance
                .neighbors(i)
                .iter()
                .zip(instance.weight_row(i))
                .map(|(nb, &w)| (nb.node, w))
                .collect()
        })
        .collect()
}

/// Gated Potts energy of edge `(i, j)`.
pub fn pairwise_term(
    instance: &CrfInstance,
    i: usize,
    j: usize,
    y_i: usize,
    y_j: usize,
) -> Result<f64> {
    let edge = instance
        .find_edge(i, j)
        .ok_or_else(|| Error::contract(format!("({i}, {j}) is not an edge")))?;
    Ok(instance.edge_energy(edge, y_i, y_j))
}

/// Per-node label assignment, possibly partial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<Option<usize>>,
}

impl Labeling {
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            labels: vec![None; num_nodes],
        }
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        Self {
            labels: labels.iter().map(|&l| Some(l)).collect(),
        }
    }

    pub fn from_options(labels: Vec<Option<usize>>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    pub fn set(&mut self, node: usize, label: usize) {
        self.labels[node] = Some(label);
    }

    pub fn clear(&mut self, node: usize) {
        self.labels[node] = None;
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn assigned_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn to_complete(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| Error::contract(format!("node {i} is unassigned"))))
            .collect()
    }

    /// Checks length and label range against an instance.
    pub fn validate(&self, instance: &CrfInstance) -> Result<()> {
        if self.len() != instance.num_nodes() {
            return Err(Error::Shape(format!(
                "labeling has {} nodes, instance has {}",
                self.len(),
                instance.num_nodes()
            )));
        }
        if let Some((i, l)) = self
            .labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&l| l >= instance.num_labels()).map(|l| (i, l)))
        {
            return Err(Error::InvalidInstance(format!(
                "node {i} has label {l}, but only {} labels exist",
                instance.num_labels()
            )));
        }
        Ok(())
    }
}

/// Energy of the grounded terms of a (possibly partial) labeling: unaries of
/// assigned nodes, edges with both ends assigned, cliques fully assigned.
pub fn partial_energy(instance: &CrfInstance, labeling: &Labeling) -> f64 {
    let mut energy = 0.0;
    for i in 0..instance.num_nodes() {
        if let Some(y) = labeling.get(i) {
            energy += instance.unary(i)[y];
        }
    }
    for (e, &(a, b)) in instance.edges().iter().enumerate() {
        if let (Some(ya), Some(yb)) = (labeling.get(a), labeling.get(b)) {
            energy += instance.edge_energy(e, ya, yb);
        }
    }
    for clique in instance.hop1() {
        if let Ok(v) = clique.energy(labeling) {
            energy += v;
        }
    }
    for clique in instance.hop2() {
        if let Ok(v) = clique.energy(labeling) {
            energy += v;
        }
    }
    energy
}

/// Energy of a complete labeling.
pub fn total_energy(instance: &CrfInstance, labeling: &Labeling) -> Result<f64> {
    if !labeling.is_complete() {
        return Err(Error::contract("total energy needs a complete labeling"));
    }
    Ok(partial_energy(instance, labeling))
}

/// Convenience wrapper for a complete label vector.
pub fn energy_of(instance: &CrfInstance, labels: &[usize]) -> f64 {
    partial_energy(instance, &Labeling::from_labels(labels))
}

/// Incrementally maintained partial labeling and its grounded energy.
///
/// Assigning a node adds exactly the terms that become grounded: its unary,
/// edges to assigned neighbors, and cliques whose last free member it was.
#[derive(Clone, Debug, PartialEq)]
pub struct Grounding {
    labels: Labeling,
    hop1_free: Vec<usize>,
    hop1_hits: Vec<usize>,
    hop2_free: Vec<usize>,
    hop2_hits: Vec<usize>,
    energy: f64,
}

impl Grounding {
    pub fn new(instance: &CrfInstance) -> Self {
        Self {
            labels: Labeling::empty(instance.num_nodes()),
            hop1_free: instance.hop1().iter().map(|c| c.members.len()).collect(),
            hop1_hits: vec![0; instance.hop1().len()],
            hop2_free: instance.hop2().iter().map(|c| c.members.len()).collect(),
            hop2_hits: vec![0; instance.hop2().len()],
            energy: 0.0,
        }
    }

    /// Grounds a labeling by assigning its nodes in index order.
    pub fn from_labeling(instance: &CrfInstance, labeling: &Labeling) -> Self {
        let mut g = Self::new(instance);
        for i in 0..labeling.len() {
            if let Some(y) = labeling.get(i) {
                g.assign(instance, i, y);
            }
        }
        g
    }

    pub fn labels(&self) -> &Labeling {
        &self.labels
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Number of assigned members of HOP1 clique `c` that carry its label.
    pub fn hop1_hits(&self, c: usize) -> usize {
        self.hop1_hits[c]
    }

    pub fn hop1_free(&self, c: usize) -> usize {
        self.hop1_free[c]
    }

    pub fn hop2_hits(&self, c: usize) -> usize {
        self.hop2_hits[c]
    }

    pub fn hop2_free(&self, c: usize) -> usize {
        self.hop2_free[c]
    }

    /// Energy that assigning `label` to the unassigned `node` would add.
    pub fn assign_delta(&self, instance: &CrfInstance, node: usize, label: usize) -> f64 {
        debug_assert!(self.labels.get(node).is_none());
        let mut delta = instance.unary(node)[label];
        for nb in instance.neighbors(node) {
            if let Some(y) = self.labels.get(nb.node) {
                delta += instance.edge_energy(nb.edge, label, y);
            }
        }
        for &c in instance.hop1_of(node) {
            if self.hop1_free[c] == 1 {
                let clique = &instance.hop1()[c];
                delta += clique.energy_from_hits(self.hop1_hits[c] + usize::from(label == clique.label));
            }
        }
        for &c in instance.hop2_of(node) {
            if self.hop2_free[c] == 1 {
                let clique = &instance.hop2()[c];
                delta += clique.energy_from_hits(self.hop2_hits[c] + usize::from(label == clique.label));
            }
        }
        delta
    }

    /// Assigns an unassigned node and returns the energy added.
    pub fn assign(&mut self, instance: &CrfInstance, node: usize, label: usize) -> f64 {
        let delta = self.assign_delta(instance, node, label);
        self.labels.set(node, label);
        for &c in instance.hop1_of(node) {
            self.hop1_free[c] -= 1;
            self.hop1_hits[c] += usize::from(label == instance.hop1()[c].label);
        }
        for &c in instance.hop2_of(node) {
            self.hop2_free[c] -= 1;
            self.hop2_hits[c] += usize::from(label == instance.hop2()[c].label);
        }
        self.energy += delta;
        delta
    }

    /// Energy that unassigning `node` would remove.
    pub fn unassign_delta(&self, instance: &CrfInstance, node: usize) -> f64 {
        let label = self.labels.get(node).expect("node is assigned");
        let mut delta = instance.unary(node)[label];
        for nb in instance.neighbors(node) {
            if let Some(y) = self.labels.get(nb.node) {
                delta += instance.edge_energy(nb.edge, label, y);
            }
        }
        for &c in instance.hop1_of(node) {
            if self.hop1_free[c] == 0 {
                delta += instance.hop1()[c].energy_from_hits(self.hop1_hits[c]);
            }
        }
        for &c in instance.hop2_of(node) {
            if self.hop2_free[c] == 0 {
                delta += instance.hop2()[c].energy_from_hits(self.hop2_hits[c]);
            }
        }
        delta
    }

    /// Removes the assignment of `node`; returns the energy removed.
    pub fn unassign(&mut self, instance: &CrfInstance, node: usize) -> f64 {
        let delta = self.unassign_delta(instance, node);
        let label = self.labels.get(node).expect("node is assigned");
        self.labels.clear(node);
        for &c in instance.hop1_of(node) {
            self.hop1_free[c] += 1;
            self.hop1_hits[c] -= usize::from(label == instance.hop1()[c].label);
        }
        for &c in instance.hop2_of(node) {
            self.hop2_free[c] += 1;
            self.hop2_hits[c] -= usize::from(label == instance.hop2()[c].label);
        }
        self.energy -= delta;
        delta
    }

    /// Energy change from switching the label of an assigned node, all other
    /// assignments fixed.
    pub fn relabel_delta(&self, instance: &CrfInstance, node: usize, label: usize) -> f64 {
        let old = self.labels.get(node).expect("node is assigned");
        if old == label {
            return 0.0;
        }
        let unary = instance.unary(node);
        let mut delta = unary[label] - unary[old];
        for nb in instance.neighbors(node) {
            if let Some(y) = self.labels.get(nb.node) {
                delta += instance.edge_energy(nb.edge, label, y) - instance.edge_energy(nb.edge, old, y);
            }
        }
        for &c in instance.hop1_of(node) {
            if self.hop1_free[c] == 0 {
                let clique = &instance.hop1()[c];
                let hits = self.hop1_hits[c];
                let moved = hits - usize::from(old == clique.label) + usize::from(label == clique.label);
                delta += clique.energy_from_hits(moved) - clique.energy_from_hits(hits);
            }
        }
        for &c in instance.hop2_of(node) {
            if self.hop2_free[c] == 0 {
                let clique = &instance.hop2()[c];
                let hits = self.hop2_hits[c];
                let moved = hits - usize::from(old == clique.label) + usize::from(label == clique.label);
                delta += clique.energy_from_hits(moved) - clique.energy_from_hits(hits);
            }
        }
        delta
    }

    pub fn relabel(&mut self, instance: &CrfInstance, node: usize, label: usize) -> f64 {
        let delta = self.relabel_delta(instance, node, label);
        let old = self.labels.get(node).expect("node is assigned");
        self.labels.set(node, label);
        for &c in instance.hop1_of(node) {
            let l = instance.hop1()[c].label;
            self.hop1_hits[c] = self.hop1_hits[c] - usize::from(old == l) + usize::from(label == l);
        }
        for &c in instance.hop2_of(node) {
            let l = instance.hop2()[c].label;
            self.hop2_hits[c] = self.hop2_hits[c] - usize::from(old == l) + usize::from(label == l);
        }
        self.energy += delta;
        delta
    }
}
