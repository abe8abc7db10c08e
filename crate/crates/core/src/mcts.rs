//! Monte Carlo tree search over labeling episodes, and its distillation into
//! the policy network.
//!
//! Each tree node is a state; edges are the actions taken from it during
//! simulations and hold `N(a|s)` and the cumulative backed-up reward
//! `W(s,a)`. Only visited edges are stored. Inside a simulation the action
//! maximizes
//!
//! ```text
//! W(s,a)/N(a|s) + π_θ(a|s) · √N(s) / (1 + N(a|s)) + M_j(s,a)
//! ```
//!
//! with `j` drawn uniformly from the three exploration heuristics.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Labeling};
use crate::env::{Action, EpisodeState, RewardScheme};
use crate::error::{Error, Result};
use crate::explore::{heuristic_scores, unary_entropies, Heuristic};
use crate::instances::{entropy, score, Dataset};
use crate::policy::{backward, forward, legal_softmax, AdamConfig, OptimizerState, PolicyParams, ScoreCache};
use crate::replay::{route, ReplayBuffer};
use crate::training::{dataset_shape, evaluate_greedy, mean_var, shuffled, EpochLog, TrainOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MctsConfig {
    /// Simulations per move while training.
    pub n_sim: usize,
    /// Simulation depth while training.
    pub d_sim: usize,
    pub infer_n_sim: usize,
    pub infer_d_sim: usize,
    /// Add one of the exploration heuristics to the selection score while
    /// training.
    pub heuristics: bool,
    /// The same for search at inference.
    pub infer_heuristics: bool,
    pub episodes_per_graph: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient steps after each episode; 0 means one per labeled node.
    pub updates_per_episode: usize,
    pub epochs: usize,
    pub rounds: usize,
    pub embed_dim: usize,
    pub adam: AdamConfig,
    pub scheme: RewardScheme,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            n_sim: 50,
            d_sim: 4,
            infer_n_sim: 20,
            infer_d_sim: 4,
            heuristics: true,
            infer_heuristics: false,
            episodes_per_graph: 10,
            batch_size: 64,
            buffer_capacity: 100_000,
            updates_per_episode: 0,
            epochs: 1,
            rounds: 3,
            embed_dim: 32,
            adam: AdamConfig::default(),
            scheme: RewardScheme::Sign,
            seed: 0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim == 0 || self.d_sim == 0 || self.infer_n_sim == 0 || self.infer_d_sim == 0 {
            return Err(Error::InvalidConfig("simulation counts and depths must be at least 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidConfig("batch_size, buffer_capacity and embed_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub action: Action,
    /// `N(a|s)`.
    pub visits: u64,
    /// `W(s,a)`.
    pub total: f64,
    pub child: usize,
}

impl Edge {
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeNode {
    /// `N(s)`: simulations that took an action from this state.
    pub visits: u64,
    pub expanded: bool,
    pub edges: Vec<Edge>,
}

impl TreeNode {
    pub fn edge(&self, action: Action) -> Option<&Edge> {
        self.edges.iter().find(|e| e.action == action)
    }
}

/// Arena of tree nodes with a movable root.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl Default for SearchTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SearchTree {
    pub fn new() -> Self {
        Self {
            nodes: vec![TreeNode::default()],
            root: 0,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Edge index and child of `action` at `id`, creating both if needed.
    fn child_or_insert(&mut self, id: usize, action: Action) -> (usize, usize) {
        if let Some(k) = self.nodes[id].edges.iter().position(|e| e.action == action) {
            return (k, self.nodes[id].edges[k].child);
        }
        let child = self.nodes.len();
        self.nodes.push(TreeNode::default());
        self.nodes[id].edges.push(Edge {
            action,
            visits: 0,
            total: 0.0,
            child,
        });
        (self.nodes[id].edges.len() - 1, child)
    }

    /// Makes the child reached by `action` the new root, keeping its subtree.
    pub fn advance(&mut self, action: Action) {
        let root = self.root;
        self.root = self.child_or_insert(root, action).1;
    }

    /// `N(s) = Σ_a N(a|s)` at every node reachable from the root.
    pub fn counts_consistent(&self) -> bool {
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.visits != n.edges.iter().map(|e| e.visits).sum::<u64>() {
                return false;
            }
            stack.extend(n.edges.iter().map(|e| e.child));
        }
        true
    }
}

/// `W/N(a|s) + prior · √N(s) / (1 + N(a|s))`, with the mean taken as 0 for
/// unvisited edges.
pub fn pucb(total: f64, edge_visits: u64, state_visits: u64, prior: f64) -> f64 {
    let mean = if edge_visits == 0 { 0.0 } else { total / edge_visits as f64 };
    mean + prior * (state_visits as f64).sqrt() / (1.0 + edge_visits as f64)
}

/// Visit-count distribution `N(a|s)/N(s)` over the actions taken at `id`.
pub fn tree_policy(tree: &SearchTree, id: usize) -> Result<Vec<(Action, f64)>> {
    let node = tree.node(id);
    if node.visits == 0 {
        return Err(Error::contract("tree policy of an unvisited state"));
    }
    let n = node.visits as f64;
    Ok(node
        .edges
        .iter()
        .filter(|e| e.visits > 0)
        .map(|e| (e.action, e.visits as f64 / n))
        .collect())
}

/// Highest-probability action, lowest `(node, label)` on ties.
pub fn policy_argmax(policy: &[(Action, f64)]) -> Option<Action> {
    policy
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && (cur.0.node, cur.0.label) < (best.0.node, best.0.label)) {
                cur
            } else {
                best
            }
        })
        .map(|(a, _)| a)
}

fn sample_policy<R: Rng>(policy: &[(Action, f64)], rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(a, p) in policy {
        acc += p;
        if u < acc {
            return a;
        }
    }
    policy.last().expect("non-empty policy").0
}

/// A search rooted at the current state of one episode.
pub struct Search<'a> {
    instance: &'a CrfInstance,
    params: &'a PolicyParams,
    state: EpisodeState,
    cache: ScoreCache,
    entropies: Vec<f64>,
    scheme: RewardScheme,
    heuristics: bool,
    tree: SearchTree,
}

impl<'a> Search<'a> {
    pub fn new(
        instance: &'a CrfInstance,
        params: &'a PolicyParams,
        scheme: RewardScheme,
        heuristics: bool,
    ) -> Result<Self> {
        params.check_compatible(instance)?;
        let state = EpisodeState::new(instance);
        let cache = ScoreCache::new(params, instance, state.labeling())?.with_journal();
        Ok(Self {
            instance,
            params,
            state,
            cache,
            entropies: unary_entropies(instance),
            scheme,
            heuristics,
            tree: SearchTree::new(),
        })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    /// Network policy `π_θ(·|s)` at the current simulated state, flat `N × |L|`.
    pub fn network_policy(&self) -> Vec<f64> {
        legal_softmax(self.cache.scores(), self.cache.labels(), self.instance.num_labels())
    }

    /// Selection rule at tree node `id`, which must correspond to the
    /// current simulated state. Ties go to the lowest `(node, label)`.
    pub fn select_action_in_simulation<R: Rng>(&self, id: usize, rng: &mut R) -> Result<Action> {
        let node = self.tree.node(id);
        if !node.expanded {
            return Err(Error::contract("selection at an unexpanded node"));
        }
        let l = self.instance.num_labels();
        let prior = self.network_policy();
        let sqrt_n = (node.visits as f64).sqrt();
        let mut values: Vec<f64> = prior.iter().map(|p| p * sqrt_n).collect();
        for e in &node.edges {
            let k = e.action.index(l);
            values[k] = pucb(e.total, e.visits, node.visits, prior[k]);
        }
        if self.heuristics {
            let which = Heuristic::ALL[rng.random_range(0..3)];
            let m = heuristic_scores(self.instance, self.state.labeling(), &self.entropies, which);
            for (v, m) in values.iter_mut().zip(m) {
                *v += m;
            }
        }
        let labels = self.state.labeling();
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in values.iter().enumerate() {
            if labels.get(k / l).is_some() {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| Action::from_index(k, l))
            .ok_or_else(|| Error::contract("no legal action at a complete state"))
    }

    /// One simulation: descend at most `depth` steps from the root,
    /// materializing every visited state, then back up along the path. Each
    /// edge receives the sum of the rewards collected from it downwards.
    /// Returns the per-edge backed-up values, root edge first.
    pub fn run_simulation<R: Rng>(&mut self, depth: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut path: Vec<(usize, usize, f64)> = Vec::with_capacity(depth);
        let mut id = self.tree.root;
        let outcome = (|| -> Result<()> {
            while path.len() < depth && !self.state.is_complete() {
                self.tree.nodes[id].expanded = true;
                let action = self.select_action_in_simulation(id, rng)?;
                let reward = self.state.apply(self.instance, action, self.scheme)?;
                self.cache.apply(self.params, self.instance, action.node, action.label)?;
                let (edge, child) = self.tree.child_or_insert(id, action);
                path.push((id, edge, reward));
                id = child;
            }
            Ok(())
        })();
        for _ in 0..path.len() {
            self.state.undo(self.instance);
            self.cache.undo();
        }
        outcome?;
        let mut returns = vec![0.0; path.len()];
        let mut g = 0.0;
        for (k, &(node, edge, reward)) in path.iter().enumerate().rev() {
            g += reward;
            returns[k] = g;
            let n = &mut self.tree.nodes[node];
            n.visits += 1;
            n.edges[edge].visits += 1;
            n.edges[edge].total += g;
        }
        Ok(returns)
    }

    /// Runs `n_sim` simulations and returns the root search policy.
    pub fn search<R: Rng>(&mut self, n_sim: usize, depth: usize, rng: &mut R) -> Result<Vec<(Action, f64)>> {
        for _ in 0..n_sim {
            self.run_simulation(depth, rng)?;
        }
        tree_policy(&self.tree, self.tree.root)
    }

    /// Executes `action` for real and re-roots the tree. Returns the reward.
    pub fn commit(&mut self, action: Action) -> Result<f64> {
        let reward = self.state.apply(self.instance, action, self.scheme)?;
        self.cache.apply(self.params, self.instance, action.node, action.label)?;
        self.cache.commit();
        self.tree.advance(action);
        Ok(reward)
    }
}

/// Budgeted search inference: `infer_n_sim` simulations of depth
/// `infer_d_sim` per move, then the most visited root action.
pub fn mcts_infer(instance: &CrfInstance, params: &PolicyParams, config: &MctsConfig) -> Result<Labeling> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut search = Search::new(instance, params, config.scheme, config.infer_heuristics)?;
    while !search.state().is_complete() {
        let policy = search.search(config.infer_n_sim, config.infer_d_sim, &mut rng)?;
        let action = policy_argmax(&policy).expect("a visited root has an edge");
        search.commit(action)?;
    }
    Ok(search.state().labeling().clone())
}

/// One distillation target: a state and its search policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample {
    pub instance: usize,
    pub state: Vec<Action>,
    pub policy: Vec<(Action, f64)>,
}

impl PolicySample {
    pub fn labeling(&self, num_nodes: usize) -> Labeling {
        let mut lab = Labeling::empty(num_nodes);
        for a in &self.state {
            lab.set(a.node, a.label);
        }
        lab
    }
}

/// Cross-entropy `−Σ π^MCTS log π_θ` of a batch and its gradient, averaged
/// over the batch.
pub fn cross_entropy_and_grad(
    params: &PolicyParams,
    dataset: &Dataset,
    batch: &[&PolicySample],
) -> Result<(f64, PolicyParams)> {
    let mut grads = PolicyParams::zeros(params.shape());
    let mut loss = 0.0;
    let scale = 1.0 / batch.len().max(1) as f64;
    for s in batch {
        let inst = &dataset.items[s.instance].0;
        let l = inst.num_labels();
        let lab = s.labeling(inst.num_nodes());
        let pass = forward(params, inst, &lab)?;
        let p = legal_softmax(pass.scores(), lab.as_slice(), l);
        let mut upstream = p.clone();
        for &(a, target) in &s.policy {
            let k = a.index(l);
            loss -= scale * target * p[k].max(f64::MIN_POSITIVE).ln();
            upstream[k] -= target;
        }
        for u in &mut upstream {
            *u *= scale;
        }
        grads.add_scaled(&backward(params, &pass, inst, &upstream)?, 1.0);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok((loss, grads))
}

/// Self-play training: per move `n_sim` simulations, the executed action is
/// sampled from the search policy, and `(state, policy)` pairs are distilled
/// into the network from the structured replay memory.
pub fn mcts_train(
    dataset: &Dataset,
    config: &MctsConfig,
    init: Option<(PolicyParams, Option<OptimizerState>)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let shape = dataset_shape(dataset, config.rounds, config.embed_dim)?;
    let (mut params, opt) = init.unwrap_or_else(|| (PolicyParams::init(shape, config.seed), None));
    if params.shape() != shape {
        return Err(Error::Shape("initial parameters do not match the dataset".into()));
    }
    let mut opt = opt.unwrap_or_else(|| OptimizerState::new(&params, config.adam));
    opt.config = config.adam;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x3C75);
    let mut buffer: ReplayBuffer<PolicySample> = ReplayBuffer::new(shape.num_labels, config.buffer_capacity);
    let mut log = Vec::with_capacity(config.epochs);
    let mut epoch_seconds = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let (mut losses, mut entropies) = (Vec::new(), Vec::new());
        let (mut energies, mut accuracies) = (Vec::new(), Vec::new());
        let mut updates = 0;
        for idx in shuffled(&mut rng, &dataset.train) {
            let (inst, truth) = &dataset.items[idx];
            for _ in 0..config.episodes_per_graph {
                let mut search = Search::new(inst, &params, config.scheme, config.heuristics)?;
                while !search.state().is_complete() {
                    let policy = search.search(config.n_sim, config.d_sim, &mut rng)?;
                    let probs: Vec<f64> = policy.iter().map(|p| p.1).collect();
                    entropies.push(entropy(&probs));
                    let action = sample_policy(&policy, &mut rng);
                    let state = search.state();
                    let reward = state.reward(inst, action, config.scheme)?;
                    let chunk = route(inst, state, action, reward, config.scheme)?;
                    buffer.push(
                        chunk,
                        action.label,
                        PolicySample {
                            instance: idx,
                            state: state.actions().to_vec(),
                            policy,
                        },
                    );
                    search.commit(action)?;
                }
                energies.push(search.state().energy());
                accuracies.push(score(search.state().labeling(), truth)?.accuracy);
                drop(search);

                if buffer.len() >= config.batch_size {
                    let steps = if config.updates_per_episode == 0 {
                        inst.num_nodes()
                    } else {
                        config.updates_per_episode
                    };
                    for _ in 0..steps {
                        let batch = buffer.sample(&mut rng, config.batch_size);
                        let (loss, grads) = cross_entropy_and_grad(&params, dataset, &batch)?;
                        opt.step(&mut params, &grads)?;
                        losses.push(loss);
                        updates += 1;
                    }
                }
            }
        }
        let (loss_mean, loss_var) = mean_var(&losses);
        let validation = evaluate_greedy(&params, dataset.validation_items())?;
        log.push(EpochLog {
            epoch,
            episodes: energies.len(),
            updates,
            optimizer_step: opt.step,
            loss_mean,
            loss_var,
            episode_energy: mean_var(&energies).0,
            episode_accuracy: mean_var(&accuracies).0,
            epsilon: None,
            td_abs_mean: None,
            root_entropy: Some(mean_var(&entropies).0),
            validation_energy: validation.map(|v| v.0),
            validation_accuracy: validation.map(|v| v.1),
        });
        epoch_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(TrainOutcome {
        params,
        optimizer: opt,
        log,
        epoch_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{InstanceParts, PairwiseGate};
    use crate::policy::PolicyShape;

    fn unary_instance(unary: Vec<Vec<f64>>) -> CrfInstance {
        let n = unary.len();
        CrfInstance::new(InstanceParts {
            num_labels: unary[0].len(),
            edges: vec![],
            node_features: vec![vec![0.0]; n],
            hypercolumns: vec![vec![0.0]; n],
            unary,
            gate: PairwiseGate { alpha: 0.0, beta: 0.0 },
            hop1: vec![],
            hop2: vec![],
        })
        .unwrap()
    }

    #[test]
    fn pucb_example() {
        assert_eq!(pucb(2.0, 1, 4, 0.5), 2.5);
        assert_eq!(pucb(0.0, 0, 0, 0.3), 0.0);
    }

    #[test]
    fn tree_policy_ratios() {
        let mut tree = SearchTree::new();
        tree.nodes[0].visits = 4;
        tree.child_or_insert(0, Action::new(0, 0));
        tree.child_or_insert(0, Action::new(0, 1));
        tree.nodes[0].edges[0].visits = 3;
        tree.nodes[0].edges[1].visits = 1;
        let p = tree_policy(&tree, 0).unwrap();
        assert_eq!(p, vec![(Action::new(0, 0), 0.75), (Action::new(0, 1), 0.25)]);
        assert_eq!(policy_argmax(&p), Some(Action::new(0, 0)));
        assert!(tree_policy(&SearchTree::new(), 0).is_err());
    }

    #[test]
    fn first_simulation_bookkeeping() {
        let inst = unary_instance(vec![vec![0.0, 1.0]; 6]);
        let params = PolicyParams::zeros(PolicyShape::for_instance(&inst, 1, 2));
        let mut search = Search::new(&inst, &params, RewardScheme::EnergyDelta, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let returns = search.run_simulation(3, &mut rng).unwrap();
        assert_eq!(returns.len(), 3);
        let root = search.tree().node(0);
        assert_eq!(root.visits, 1);
        assert_eq!(root.edges.len(), 1);
        assert_eq!(root.edges[0].visits, 1);
        assert!(search.tree().counts_consistent());
        assert_eq!(search.state().num_assigned(), 0);
    }

    #[test]
    fn uniform_ties_go_to_lowest_action() {
        let inst = unary_instance(vec![vec![0.0, 0.0]; 3]);
        let params = PolicyParams::zeros(PolicyShape::for_instance(&inst, 1, 2));
        let mut search = Search::new(&inst, &params, RewardScheme::EnergyDelta, true).unwrap();
        search.tree.nodes[0].expanded = true;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert_eq!(search.select_action_in_simulation(0, &mut rng).unwrap(), Action::new(0, 0));
        }
        search.tree.nodes[0].expanded = false;
        assert!(search.select_action_in_simulation(0, &mut rng).is_err());
    }

    #[test]
    fn repeated_first_action_accumulates() {
        // Two nodes, one label choice dominates, so every simulation starts
        // with the same action once it has been tried.
        let inst = unary_instance(vec![vec![-50.0, 0.0], vec![-50.0, 0.0]]);
        let params = PolicyParams::zeros(PolicyShape::for_instance(&inst, 1, 2));
        let mut search = Search::new(&inst, &params, RewardScheme::EnergyDelta, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r1 = search.run_simulation(1, &mut rng).unwrap();
        let r2 = search.run_simulation(1, &mut rng).unwrap();
        let root = search.tree().node(0);
        let first = root.edges[0];
        assert_eq!(first.action, Action::new(0, 0));
        assert_eq!(first.visits, 2);
        assert_eq!(first.total, r1[0] + r2[0]);
    }

    #[test]
    fn depth_cap_is_respected() {
        let inst = unary_instance(vec![vec![0.0, 1.0]; 10]);
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 3), 2);
        let mut search = Search::new(&inst, &params, RewardScheme::Sign, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            assert!(search.run_simulation(4, &mut rng).unwrap().len() <= 4);
        }
        assert!(search.tree().counts_consistent());
    }

    #[test]
    fn inference_is_complete_and_deterministic() {
        let inst = unary_instance(vec![vec![0.3, 0.1], vec![2.0, 0.0], vec![0.0, 1.0]]);
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 3), 4);
        let cfg = MctsConfig {
            infer_n_sim: 30,
            scheme: RewardScheme::EnergyDelta,
            ..MctsConfig::default()
        };
        let a = mcts_infer(&inst, &params, &cfg).unwrap();
        assert!(a.is_complete());
        assert_eq!(a, mcts_infer(&inst, &params, &cfg).unwrap());
        assert_eq!(a.to_complete().unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn large_budget_finds_the_map_of_two_nodes() {
        use crate::baselines::brute_force_map;
        for (k, unary) in [
            vec![vec![0.0, 0.4], vec![0.9, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 0.3]],
            vec![vec![0.2, 0.0], vec![0.0, 2.0]],
        ]
        .into_iter()
        .enumerate()
        {
            let inst = CrfInstance::new(InstanceParts {
                num_labels: 2,
                edges: vec![(0, 1)],
                node_features: vec![vec![0.0]; 2],
                hypercolumns: vec![vec![0.0]; 2],
                unary,
                gate: PairwiseGate { alpha: 1.0, beta: 0.5 },
                hop1: vec![],
                hop2: vec![],
            })
            .unwrap();
            let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 3), k as u64);
            let cfg = MctsConfig {
                infer_n_sim: 500,
                infer_d_sim: 2,
                scheme: RewardScheme::EnergyDelta,
                ..MctsConfig::default()
            };
            let got = mcts_infer(&inst, &params, &cfg).unwrap().to_complete().unwrap();
            let best = brute_force_map(&inst, 16).unwrap();
            assert_eq!(crate::crf::energy_of(&inst, &got), best.energy, "case {k}");
        }
    }

    #[test]
    fn cross_entropy_bounded_by_target_entropy() {
        let inst = unary_instance(vec![vec![0.0, 1.0]; 2]);
        let ds = Dataset::all_train(vec![(inst.clone(), Labeling::from_labels(&[0, 0]))]).unwrap();
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 1, 3), 1);
        let sample = PolicySample {
            instance: 0,
            state: vec![],
            policy: vec![(Action::new(0, 0), 0.5), (Action::new(1, 0), 0.5)],
        };
        let (loss, _) = cross_entropy_and_grad(&params, &ds, &[&sample]).unwrap();
        assert!(loss >= 2f64.ln() - 1e-12);
    }
}
