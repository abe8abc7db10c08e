//! Reference solvers: exhaustive search, iterated conditional modes, loopy
//! min-sum belief propagation, simulated annealing, unary argmin and a
//! per-node logistic regression.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::{argmin, energy_of, CrfInstance, Grounding, Labeling};
use crate::error::{Error, Result};
use crate::instances::Dataset;

/// Default cap on `|L|^N` for exhaustive search.
pub const BRUTE_FORCE_CAP: u128 = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub solver: String,
    pub labels: Vec<usize>,
    /// Total energy of `labels`, recomputed from scratch.
    pub energy: f64,
    pub seconds: f64,
    pub iterations: usize,
}

impl SolverResult {
    fn finish(solver: &str, instance: &CrfInstance, labels: Vec<usize>, started: Instant, iterations: usize) -> Self {
        Self {
            solver: solver.to_string(),
            energy: energy_of(instance, &labels),
            labels,
            seconds: started.elapsed().as_secs_f64(),
            iterations,
        }
    }

    pub fn labeling(&self) -> Labeling {
        Labeling::from_labels(&self.labels)
    }
}

pub fn unary_argmin(instance: &CrfInstance) -> SolverResult {
    let started = Instant::now();
    SolverResult::finish("unary", instance, instance.unary_argmin(), started, 1)
}

/// Number of labelings, saturating.
pub fn search_space(instance: &CrfInstance) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..instance.num_nodes() {
        total = total.saturating_mul(instance.num_labels() as u128);
    }
    total
}

/// Exact MAP by enumeration in lexicographic order; among equal energies the
/// lexicographically smallest labeling wins.
pub fn brute_force_map(instance: &CrfInstance, cap: u128) -> Result<SolverResult> {
    let space = search_space(instance);
    if space > cap {
        return Err(Error::Unsupported(format!(
            "{space} labelings exceed the brute-force cap of {cap}"
        )));
    }
    let started = Instant::now();
    let (n, l) = (instance.num_nodes(), instance.num_labels());
    let mut labels = vec![0usize; n];
    let mut g = Grounding::from_labeling(instance, &Labeling::from_labels(&labels));
    // The running energy is only a filter; candidates are re-scored exactly.
    let mut best_labels = labels.clone();
    let mut best = energy_of(instance, &labels);
    let mut visited = 1;
    'outer: loop {
        let mut i = n;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            if labels[i] + 1 < l {
                labels[i] += 1;
                g.relabel(instance, i, labels[i]);
                break;
            }
            labels[i] = 0;
            g.relabel(instance, i, 0);
        }
        visited += 1;
        if g.energy() < best + 1e-9 {
            let exact = energy_of(instance, &labels);
            if exact < best {
                best = exact;
                best_labels.copy_from_slice(&labels);
            }
        }
    }
    Ok(SolverResult::finish("brute_force", instance, best_labels, started, visited))
}

/// Best single-node relabeling: `(node, label, delta)` with the most
/// negative energy change, if any change is below `-tol`.
pub fn best_single_move(instance: &CrfInstance, labels: &[usize], tol: f64) -> Option<(usize, usize, f64)> {
    let g = Grounding::from_labeling(instance, &Labeling::from_labels(labels));
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..instance.num_nodes() {
        for y in 0..instance.num_labels() {
            let d = g.relabel_delta(instance, i, y);
            if d < -tol && best.is_none_or(|b| d < b.2) {
                best = Some((i, y, d));
            }
        }
    }
    best
}

/// Whether some single-node change lowers the energy by more than `tol`.
pub fn icm_improvable(instance: &CrfInstance, labels: &[usize], tol: f64) -> bool {
    best_single_move(instance, labels, tol).is_some()
}

/// Iterated conditional modes: sweep the nodes in index order, moving each
/// to its best label given the rest, until a sweep changes nothing.
pub fn icm(instance: &CrfInstance, init: &[usize]) -> Result<SolverResult> {
    let started = Instant::now();
    Labeling::from_labels(init).validate(instance)?;
    if init.len() != instance.num_nodes() {
        return Err(Error::contract("initial labeling has the wrong length"));
    }
    let mut g = Grounding::from_labeling(instance, &Labeling::from_labels(init));
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for i in 0..instance.num_nodes() {
            let current = g.labels().get(i).expect("complete");
            let mut best = (current, 0.0);
            for y in 0..instance.num_labels() {
                let d = g.relabel_delta(instance, i, y);
                if d < best.1 - 1e-12 {
                    best = (y, d);
                }
            }
            if best.0 != current {
                g.relabel(instance, i, best.0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let labels = g.labels().to_complete()?;
    Ok(SolverResult::finish("icm", instance, labels, started, sweeps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpConfig {
    pub max_iters: usize,
    /// Weight of the previous message in each update.
    pub damping: f64,
    /// Stop once no message entry moves by more than this.
    pub tolerance: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            damping: 0.5,
            tolerance: 1e-6,
        }
    }
}

/// Pairwise model behind BP: the CRF nodes plus one binary variable per
/// HOP1 clique linked to every member.
struct PairwiseModel {
    states: Vec<usize>,
    unary: Vec<Vec<f64>>,
    /// `(a, b, table)` with `table[x_a * states[b] + x_b]`.
    factors: Vec<(usize, usize, Vec<f64>)>,
    /// Per variable: `(factor, other end, this var is the factor's first)`.
    incident: Vec<Vec<(usize, usize, bool)>>,
}

impl PairwiseModel {
    fn build(instance: &CrfInstance) -> Result<Self> {
        if !instance.hop2().is_empty() {
            return Err(Error::Unsupported(
                "count-threshold cliques have no pairwise form; use another solver".into(),
            ));
        }
        let (n, l) = (instance.num_nodes(), instance.num_labels());
        let mut states = vec![l; n];
        let mut unary: Vec<Vec<f64>> = (0..n).map(|i| instance.unary(i).to_vec()).collect();
        let mut factors = Vec::new();
        for (e, &(a, b)) in instance.edges().iter().enumerate() {
            let table = (0..l * l).map(|k| instance.edge_energy(e, k / l, k % l)).collect();
            factors.push((a, b, table));
        }
        for c in instance.hop1() {
            // z = 1 keeps the detection: members off its label pay w·c.
            // z = 0 rejects it: members on its label pay w·c.
            let z = states.len();
            states.push(2);
            unary.push(vec![0.0, 0.0]);
            let s = c.scale();
            for &m in &c.members {
                let table = (0..l)
                    .flat_map(|y| [if y == c.label { s } else { 0.0 }, if y == c.label { 0.0 } else { s }])
                    .collect();
                factors.push((m, z, table));
            }
        }
        let mut incident = vec![Vec::new(); states.len()];
        for (f, &(a, b, _)) in factors.iter().enumerate() {
            incident[a].push((f, b, true));
            incident[b].push((f, a, false));
        }
        Ok(Self {
            states,
            unary,
            factors,
            incident,
        })
    }

    fn table(&self, f: usize, first: bool, mine: usize, other: usize) -> f64 {
        let (_, b, t) = &self.factors[f];
        let b = *b;
        if first {
            t[mine * self.states[b] + other]
        } else {
            t[other * self.states[b] + mine]
        }
    }
}

/// Min-sum loopy belief propagation with synchronous damped updates and
/// zero-initialized messages. Decoding walks the variables breadth-first and
/// fixes each to the argmin of its belief conditioned on the neighbors
/// already fixed, which is exact on trees even with ties.
pub fn loopy_bp_map(instance: &CrfInstance, config: &BpConfig) -> Result<SolverResult> {
    if !(0.0..1.0).contains(&config.damping) {
        return Err(Error::InvalidConfig("damping must lie in [0, 1)".into()));
    }
    let started = Instant::now();
    let model = PairwiseModel::build(instance)?;
    let nf = model.factors.len();
    // msg[2f] flows first → second, msg[2f+1] second → first.
    let mut msg: Vec<Vec<f64>> = (0..2 * nf)
        .map(|k| {
            let (a, b, _) = model.factors[k / 2];
            vec![0.0; model.states[if k % 2 == 0 { b } else { a }]]
        })
        .collect();
    let mut next = msg.clone();
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        let mut change: f64 = 0.0;
        for (k, out) in next.iter_mut().enumerate() {
            let f = k / 2;
            let (a, b, _) = model.factors[f];
            let (src, first) = if k % 2 == 0 { (a, true) } else { (b, false) };
            let mut base = model.unary[src].clone();
            for &(g, _, g_first) in &model.incident[src] {
                if g == f {
                    continue;
                }
                let incoming = &msg[2 * g + usize::from(g_first)];
                for (x, v) in base.iter_mut().enumerate() {
                    *v += incoming[x];
                }
            }
            for (xt, o) in out.iter_mut().enumerate() {
                *o = (0..base.len())
                    .map(|xs| base[xs] + model.table(f, first, xs, xt))
                    .fold(f64::INFINITY, f64::min);
            }
            let floor = out.iter().copied().fold(f64::INFINITY, f64::min);
            for (o, &old) in out.iter_mut().zip(&msg[k]) {
                *o = (1.0 - config.damping) * (*o - floor) + config.damping * old;
                change = change.max((*o - old).abs());
            }
        }
        std::mem::swap(&mut msg, &mut next);
        if change < config.tolerance {
            break;
        }
    }

    let nv = model.states.len();
    let mut value: Vec<Option<usize>> = vec![None; nv];
    let mut queue = VecDeque::new();
    for root in 0..nv {
        if value[root].is_some() {
            continue;
        }
        queue.push_back(root);
        let mut queued = vec![false; nv];
        queued[root] = true;
        while let Some(v) = queue.pop_front() {
            let mut cost = model.unary[v].clone();
            for &(f, other, first) in &model.incident[v] {
                match value[other] {
                    Some(xo) => {
                        for (x, c) in cost.iter_mut().enumerate() {
                            *c += model.table(f, first, x, xo);
                        }
                    }
                    None => {
                        let incoming = &msg[2 * f + usize::from(first)];
                        for (x, c) in cost.iter_mut().enumerate() {
                            *c += incoming[x];
                        }
                    }
                }
            }
            value[v] = Some(argmin(&cost));
            for &(_, other, _) in &model.incident[v] {
                if value[other].is_none() && !queued[other] {
                    queued[other] = true;
                    queue.push_back(other);
                }
            }
        }
    }
    let labels = value[..instance.num_nodes()].iter().map(|v| v.expect("decoded")).collect();
    Ok(SolverResult::finish("bp", instance, labels, started, iterations))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    /// Each sweep makes `N` single-site proposals at one temperature.
    pub sweeps: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t_start: 2.0,
            t_end: 0.01,
            sweeps: 200,
        }
    }
}

impl AnnealSchedule {
    /// Geometric temperature of sweep `k`.
    pub fn temperature(&self, k: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.t_end;
        }
        let frac = k as f64 / (self.sweeps - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

/// Single-site Metropolis annealing from `init`; returns the best labeling
/// visited. A zero temperature accepts only strict improvements.
pub fn simulated_annealing(
    instance: &CrfInstance,
    init: &[usize],
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<SolverResult> {
    if !(schedule.t_start >= 0.0 && schedule.t_end >= 0.0) {
        return Err(Error::InvalidConfig("temperatures must be >= 0".into()));
    }
    let started = Instant::now();
    let init_lab = Labeling::from_labels(init);
    init_lab.validate(instance)?;
    if init.len() != instance.num_nodes() {
        return Err(Error::contract("initial labeling has the wrong length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, l) = (instance.num_nodes(), instance.num_labels());
    let mut g = Grounding::from_labeling(instance, &init_lab);
    let mut best_labels = init.to_vec();
    let mut best = energy_of(instance, init);
    let mut current = best;
    for k in 0..schedule.sweeps {
        let t = schedule.temperature(k);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let old = g.labels().get(i).expect("complete");
            let mut y = rng.random_range(0..l - 1);
            if y >= old {
                y += 1;
            }
            let d = g.relabel_delta(instance, i, y);
            let u: f64 = rng.random();
            if d < 0.0 || (t > 0.0 && u < (-d / t).exp()) {
                g.relabel(instance, i, y);
                current += d;
                if current < best - 1e-12 {
                    let labels = g.labels().to_complete()?;
                    let exact = energy_of(instance, &labels);
                    current = exact;
                    if exact < best {
                        best = exact;
                        best_labels = labels;
                    }
                }
            }
        }
    }
    Ok(SolverResult::finish("annealing", instance, best_labels, started, schedule.sweeps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisedConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.5,
            l2: 0.0,
        }
    }
}

/// Multinomial logistic regression from node features to labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeClassifier {
    pub num_labels: usize,
    pub num_features: usize,
    /// Row-major `|L| × (F + 1)`, bias last.
    pub weights: Vec<f64>,
}

impl NodeClassifier {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let w = self.num_features + 1;
        (0..self.num_labels)
            .map(|c| {
                let row = &self.weights[c * w..(c + 1) * w];
                row[..self.num_features].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[self.num_features]
            })
            .collect()
    }

    /// Full-batch gradient descent on the mean cross-entropy over every node
    /// of the training split, from zero weights.
    pub fn fit(dataset: &Dataset, config: &SupervisedConfig) -> Result<Self> {
        let mut samples: Vec<(&[f64], usize)> = Vec::new();
        for (inst, truth) in dataset.train_items() {
            for i in 0..inst.num_nodes() {
                samples.push((inst.features(i), truth.get(i).expect("complete truth")));
            }
        }
        let Some((first, _)) = dataset.train_items().next() else {
            return Err(Error::InvalidConfig("training split is empty".into()));
        };
        let (l, f) = (first.num_labels(), first.num_features());
        if samples.iter().any(|(x, _)| x.len() != f) {
            return Err(Error::Shape("training instances differ in feature dimension".into()));
        }
        let mut model = Self {
            num_labels: l,
            num_features: f,
            weights: vec![0.0; l * (f + 1)],
        };
        let w = f + 1;
        let scale = 1.0 / samples.len().max(1) as f64;
        let mut grad = vec![0.0; model.weights.len()];
        for _ in 0..config.epochs {
            grad.fill(0.0);
            for &(x, y) in &samples {
                let p = crate::crf::softmax(&model.logits(x));
                for c in 0..l {
                    let coef = (p[c] - f64::from(u8::from(c == y))) * scale;
                    let row = &mut grad[c * w..(c + 1) * w];
                    for (g, &xv) in row[..f].iter_mut().zip(x) {
                        *g += coef * xv;
                    }
                    row[f] += coef;
                }
            }
            for (wv, g) in model.weights.iter_mut().zip(&grad) {
                *wv -= config.learning_rate * (g + config.l2 * *wv);
            }
        }
        Ok(model)
    }

    pub fn predict_labels(&self, instance: &CrfInstance) -> Result<Vec<usize>> {
        if instance.num_features() != self.num_features || instance.num_labels() != self.num_labels {
            return Err(Error::Shape("classifier does not match the instance dimensions".into()));
        }
        Ok((0..instance.num_nodes())
            .map(|i| {
                let z = self.logits(instance.features(i));
                let neg: Vec<f64> = z.iter().map(|v| -v).collect();
                argmin(&neg)
            })
            .collect())
    }

    pub fn predict(&self, instance: &CrfInstance) -> Result<SolverResult> {
        let started = Instant::now();
        let labels = self.predict_labels(instance)?;
        Ok(SolverResult::finish("supervised", instance, labels, started, 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{total_energy, Hop1Clique, Hop2Clique, InstanceParts, PairwiseGate};

    fn instance(n: usize, l: usize, edges: Vec<(usize, usize)>, seed: u64, hop1: Vec<Hop1Clique>) -> CrfInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CrfInstance::new(InstanceParts {
            num_labels: l,
            edges,
            node_features: vec![vec![0.0]; n],
            hypercolumns: (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect(),
            unary: (0..n).map(|_| (0..l).map(|_| rng.random_range(0.0..2.0)).collect()).collect(),
            gate: PairwiseGate { alpha: 1.3, beta: 0.5 },
            hop1,
            hop2: vec![],
        })
        .unwrap()
    }

    #[test]
    fn brute_force_on_separable_and_two_node() {
        let inst = instance(5, 3, vec![], 1, vec![]);
        let r = brute_force_map(&inst, BRUTE_FORCE_CAP).unwrap();
        assert_eq!(r.labels, inst.unary_argmin());
        assert_eq!(r.iterations, 243);

        let two = CrfInstance::new(InstanceParts {
            num_labels: 2,
            edges: vec![(0, 1)],
            node_features: vec![vec![0.0]; 2],
            hypercolumns: vec![vec![0.0]; 2],
            unary: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            gate: PairwiseGate { alpha: 10.0, beta: 1.0 },
            hop1: vec![],
            hop2: vec![],
        })
        .unwrap();
        let r = brute_force_map(&two, BRUTE_FORCE_CAP).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels, vec![0, 0]);
        assert_eq!(r.energy, total_energy(&two, &r.labeling()).unwrap());
        assert!(brute_force_map(&inst, 100).is_err());
    }

    #[test]
    fn icm_fixed_point_and_descent() {
        let inst = instance(6, 3, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)], 2, vec![]);
        let exact = brute_force_map(&inst, BRUTE_FORCE_CAP).unwrap();
        let r = icm(&inst, &exact.labels).unwrap();
        assert_eq!(r.labels, exact.labels);
        assert_eq!(r.iterations, 1);
        let init = vec![2, 0, 2, 0, 2, 0];
        let r = icm(&inst, &init).unwrap();
        assert!(r.energy <= energy_of(&inst, &init));
        assert!(!icm_improvable(&inst, &r.labels, 1e-9));

        let sep = instance(4, 3, vec![], 3, vec![]);
        let r = icm(&sep, &[0, 0, 0, 0]).unwrap();
        assert_eq!(r.labels, sep.unary_argmin());
        assert!(r.iterations <= 2);
    }

    #[test]
    fn bp_exact_on_small_tree_with_clique() {
        // Path 0-1-2 and a separate node 3, joined through a HOP1 clique on {2, 3}.
        let clique = Hop1Clique {
            members: vec![2, 3],
            label: 1,
            confidence: 0.8,
            weight: 2.0,
        };
        for seed in 0..20 {
            let inst = instance(4, 3, vec![(0, 1), (1, 2)], seed, vec![clique.clone()]);
            let bp = loopy_bp_map(&inst, &BpConfig::default()).unwrap();
            let exact = brute_force_map(&inst, BRUTE_FORCE_CAP).unwrap();
            assert_eq!(bp.energy, exact.energy, "seed {seed}");
        }
        let single = instance(1, 4, vec![], 9, vec![]);
        assert_eq!(loopy_bp_map(&single, &BpConfig::default()).unwrap().labels, single.unary_argmin());
    }

    #[test]
    fn bp_rejects_count_cliques() {
        let mut parts = instance(3, 2, vec![], 0, vec![]).into_parts();
        parts.hop2.push(Hop2Clique {
            members: vec![0, 1],
            label: 0,
            penalty: 1.0,
            divisor: 2.0,
        });
        let inst = CrfInstance::new(parts).unwrap();
        assert!(matches!(
            loopy_bp_map(&inst, &BpConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn annealing_is_seeded_and_never_worse_than_init() {
        let inst = instance(8, 3, (1..8).map(|i| (i - 1, i)).collect(), 4, vec![]);
        let init = vec![0; 8];
        let s = AnnealSchedule::default();
        let a = simulated_annealing(&inst, &init, &s, 1).unwrap();
        let b = simulated_annealing(&inst, &init, &s, 1).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(a.energy <= energy_of(&inst, &init));
        assert!(a.energy >= brute_force_map(&inst, BRUTE_FORCE_CAP).unwrap().energy);
        let cold = AnnealSchedule {
            t_start: 0.0,
            t_end: 0.0,
            sweeps: 50,
        };
        let c = simulated_annealing(&inst, &init, &cold, 3).unwrap();
        assert!(!icm_improvable(&inst, &c.labels, 1e-9));
    }

    #[test]
    fn logistic_regression_separates() {
        let mut items = Vec::new();
        for k in 0..4 {
            let n = 6;
            let labels: Vec<usize> = (0..n).map(|i| (i + k) % 3).collect();
            let feats: Vec<Vec<f64>> = labels
                .iter()
                .map(|&y| (0..3).map(|c| if c == y { 1.0 } else { 0.0 }).collect())
                .collect();
            let inst = CrfInstance::new(InstanceParts {
                num_labels: 3,
                edges: vec![(0, 1)],
                node_features: feats,
                hypercolumns: vec![vec![0.0]; n],
                unary: vec![vec![0.0; 3]; n],
                gate: PairwiseGate { alpha: 0.0, beta: 0.0 },
                hop1: vec![],
                hop2: vec![],
            })
            .unwrap();
            items.push((inst, Labeling::from_labels(&labels)));
        }
        let ds = Dataset::all_train(items).unwrap();
        let model = NodeClassifier::fit(&ds, &SupervisedConfig::default()).unwrap();
        for (inst, truth) in ds.train_items() {
            assert_eq!(model.predict_labels(inst).unwrap(), truth.to_complete().unwrap());
        }
        let empty = Dataset::all_train(vec![]).unwrap();
        assert!(NodeClassifier::fit(&empty, &SupervisedConfig::default()).is_err());
    }
}
