//! Sequential labeling as a finite-horizon decision process.
//!
//! A state is the ordered list of `(node, label)` assignments made so far.
//! Each step labels one more node, so every episode has exactly `N` steps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Grounding, Labeling};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub node: usize,
    pub label: usize,
}

impl Action {
    pub fn new(node: usize, label: usize) -> Self {
        Self { node, label }
    }

    /// Row-major index into a `nodes × labels` score table.
    pub fn index(&self, num_labels: usize) -> usize {
        self.node * num_labels + self.label
    }

    pub fn from_index(index: usize, num_labels: usize) -> Self {
        Self {
            node: index / num_labels,
            label: index % num_labels,
        }
    }
}

/// Reward schemes. `EnergyDelta` is `E_{t-1} − E_t`, so episode rewards sum
/// to the negated final energy. `Sign` is `+1` when the chosen label strictly
/// beats every alternative label for the same node, `−1` otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardScheme {
    #[serde(rename = "energy")]
    EnergyDelta,
    #[default]
    #[serde(rename = "sign")]
    Sign,
}

impl FromStr for RewardScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "energy" => Ok(RewardScheme::EnergyDelta),
            "2" | "sign" => Ok(RewardScheme::Sign),
            other => Err(Error::InvalidConfig(format!(
                "unknown reward scheme {other:?} (expected 1/energy or 2/sign)"
            ))),
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardScheme::EnergyDelta => "energy",
            RewardScheme::Sign => "sign",
        })
    }
}

/// Reward for assigning `label` to the free `node` of `grounding`.
pub fn reward(
    instance: &CrfInstance,
    grounding: &Grounding,
    node: usize,
    label: usize,
    scheme: RewardScheme,
) -> f64 {
    let chosen = grounding.assign_delta(instance, node, label);
    match scheme {
        RewardScheme::EnergyDelta => -chosen,
        RewardScheme::Sign => {
            let strictly_best = (0..instance.num_labels())
                .filter(|&l| l != label)
                .all(|l| chosen < grounding.assign_delta(instance, node, l));
            if strictly_best {
                1.0
            } else {
                -1.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    order: Vec<Action>,
    grounding: Grounding,
}

impl EpisodeState {
    pub fn new(instance: &CrfInstance) -> Self {
        Self {
            order: Vec::with_capacity(instance.num_nodes()),
            grounding: Grounding::new(instance),
        }
    }

    /// Replays an assignment sequence.
    pub fn from_actions(instance: &CrfInstance, actions: &[Action]) -> Result<Self> {
        let mut state = Self::new(instance);
        for &a in actions {
            state.apply(instance, a, RewardScheme::EnergyDelta)?;
        }
        Ok(state)
    }

    pub fn actions(&self) -> &[Action] {
        &self.order
    }

    pub fn labeling(&self) -> &Labeling {
        self.grounding.labels()
    }

    pub fn grounding(&self) -> &Grounding {
        &self.grounding
    }

    /// Cached grounded energy `E_t`.
    pub fn energy(&self) -> f64 {
        self.grounding.energy()
    }

    pub fn num_assigned(&self) -> usize {
        self.order.len()
    }

    pub fn num_free(&self) -> usize {
        self.grounding.labels().len() - self.order.len()
    }

    pub fn is_assigned(&self, node: usize) -> bool {
        self.grounding.labels().get(node).is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.num_free() == 0
    }

    pub fn check_legal(&self, instance: &CrfInstance, action: Action) -> Result<()> {
        if action.node >= instance.num_nodes() {
            return Err(Error::contract(format!("node {} out of range", action.node)));
        }
        if action.label >= instance.num_labels() {
            return Err(Error::contract(format!("label {} out of range", action.label)));
        }
        if self.is_assigned(action.node) {
            return Err(Error::contract(format!("node {} is already labeled", action.node)));
        }
        Ok(())
    }

    /// Reward `action` would earn, without applying it.
    pub fn reward(&self, instance: &CrfInstance, action: Action, scheme: RewardScheme) -> Result<f64> {
        self.check_legal(instance, action)?;
        Ok(reward(instance, &self.grounding, action.node, action.label, scheme))
    }

    /// Applies `action` in place and returns its reward.
    pub fn apply(&mut self, instance: &CrfInstance, action: Action, scheme: RewardScheme) -> Result<f64> {
        let r = self.reward(instance, action, scheme)?;
        self.grounding.assign(instance, action.node, action.label);
        self.order.push(action);
        Ok(r)
    }

    /// Undoes the most recent action.
    pub fn undo(&mut self, instance: &CrfInstance) -> Option<Action> {
        let last = self.order.pop()?;
        self.grounding.unassign(instance, last.node);
        Some(last)
    }

    pub fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        let labels = self.grounding.labels();
        (0..labels.len()).filter(|&i| labels.get(i).is_none())
    }
}

/// All `(free node, label)` pairs, in `(node, label)` order.
pub fn legal_actions(instance: &CrfInstance, state: &EpisodeState) -> Vec<Action> {
    let labels = instance.num_labels();
    state
        .free_nodes()
        .flat_map(|node| (0..labels).map(move |label| Action { node, label }))
        .collect()
}

/// Value-style transition: returns the successor state and the reward.
pub fn step(
    instance: &CrfInstance,
    state: &EpisodeState,
    action: Action,
    scheme: RewardScheme,
) -> Result<(EpisodeState, f64)> {
    let mut next = state.clone();
    let r = next.apply(instance, action, scheme)?;
    Ok((next, r))
}

/// Anything that picks the next action of an episode.
pub trait Policy {
    /// Called once before the first step on `instance`.
    fn begin(&mut self, _instance: &CrfInstance) -> Result<()> {
        Ok(())
    }

    fn select(&mut self, instance: &CrfInstance, state: &EpisodeState) -> Result<Action>;

    /// Called after `action` has been applied.
    fn advance(&mut self, _instance: &CrfInstance, _action: Action) -> Result<()> {
        Ok(())
    }

    /// Per-node selection probabilities over free nodes, if the policy can
    /// produce them. Labeled nodes get 0.
    fn node_probabilities(&mut self, _instance: &CrfInstance, _state: &EpisodeState) -> Option<Vec<f64>> {
        None
    }
}

/// Labels free nodes in index order with their unary argmin.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnaryArgminPolicy;

impl Policy for UnaryArgminPolicy {
    fn select(&mut self, instance: &CrfInstance, state: &EpisodeState) -> Result<Action> {
        let node = state
            .free_nodes()
            .next()
            .ok_or_else(|| Error::contract("episode is complete"))?;
        Ok(Action::new(node, crate::crf::argmin(instance.unary(node))))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub labeling: Labeling,
    pub energy: f64,
}

impl Episode {
    pub fn labels(&self) -> Vec<usize> {
        self.labeling.to_complete().expect("episodes end complete")
    }
}

/// Runs `policy` for exactly `N` steps, recording rewards under `scheme`.
pub fn run_episode(instance: &CrfInstance, policy: &mut dyn Policy, scheme: RewardScheme) -> Result<Episode> {
    let mut state = EpisodeState::new(instance);
    let mut rewards = Vec::with_capacity(instance.num_nodes());
    policy.begin(instance)?;
    while !state.is_complete() {
        let action = policy.select(instance, &state)?;
        rewards.push(state.apply(instance, action, scheme)?);
        policy.advance(instance, action)?;
    }
    let labeling = state.labeling().clone();
    let energy = crate::crf::partial_energy(instance, &labeling);
    Ok(Episode {
        actions: state.actions().to_vec(),
        rewards,
        labeling,
        energy,
    })
}

/// Greedy inference: apply the policy's choice `N` times and return the
/// final labeling.
pub fn rollout(instance: &CrfInstance, policy: &mut dyn Policy) -> Result<Labeling> {
    Ok(run_episode(instance, policy, RewardScheme::EnergyDelta)?.labeling)
}

/// One row of a policy trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub node: usize,
    pub label: usize,
    /// Selection probability of every node; labeled nodes hold 0 and the
    /// free nodes sum to 1.
    pub probabilities: Vec<f64>,
}

/// Rollout that also records the per-step node selection distribution.
pub fn rollout_with_trace(instance: &CrfInstance, policy: &mut dyn Policy) -> Result<(Labeling, Vec<TraceStep>)> {
    let mut state = EpisodeState::new(instance);
    let mut trace = Vec::with_capacity(instance.num_nodes());
    policy.begin(instance)?;
    while !state.is_complete() {
        let probabilities = policy
            .node_probabilities(instance, &state)
            .ok_or_else(|| Error::InvalidConfig("policy cannot produce selection probabilities".into()))?;
        let action = policy.select(instance, &state)?;
        trace.push(TraceStep {
            step: state.num_assigned() + 1,
            node: action.node,
            label: action.label,
            probabilities,
        });
        state.apply(instance, action, RewardScheme::EnergyDelta)?;
        policy.advance(instance, action)?;
    }
    Ok((state.labeling().clone(), trace))
}
