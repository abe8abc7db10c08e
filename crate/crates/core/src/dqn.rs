//! Q-learning over the policy network with guided exploration and the
//! structured replay memory.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Labeling};
use crate::env::{Action, EpisodeState, RewardScheme};
use crate::error::{Error, Result};
use crate::explore::{heuristic_scores, unary_entropies, Heuristic};
use crate::instances::{score, Dataset};
use crate::policy::{backward, forward, AdamConfig, OptimizerState, PolicyParams, ScoreCache};
use crate::replay::{route, ReplayBuffer};
use crate::training::{
    dataset_shape, evaluate_greedy, mean_var, random_argmax, shuffled, EpochLog, Ramp, TrainOutcome,
};

/// How TD targets are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The parameters being trained.
    #[default]
    Online,
    /// A copy of the parameters frozen at the start of each epoch.
    EpochSnapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    /// Discount γ.
    pub gamma: f64,
    /// Probability of the argmax-Q branch at the start of training.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which ε ramps; 0 means half of all planned episodes.
    pub epsilon_decay_episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target: TargetMode,
    pub epochs: usize,
    pub episodes_per_graph: usize,
    /// Gradient steps after each episode; 0 means one per labeled node.
    pub updates_per_episode: usize,
    pub rounds: usize,
    pub embed_dim: usize,
    pub adam: AdamConfig,
    pub scheme: RewardScheme,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon_start: 0.3,
            epsilon_end: 0.95,
            epsilon_decay_episodes: 0,
            batch_size: 64,
            buffer_capacity: 100_000,
            target: TargetMode::Online,
            epochs: 1,
            episodes_per_graph: 10,
            updates_per_episode: 0,
            rounds: 3,
            embed_dim: 32,
            adam: AdamConfig::default(),
            scheme: RewardScheme::Sign,
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive");
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive");
        }
        Ok(())
    }
}

/// One stored experience. The state is the ordered assignment list; the next
/// state appends `action`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub instance: usize,
    pub state: Vec<Action>,
    pub action: Action,
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn labeling(&self, num_nodes: usize) -> Labeling {
        let mut lab = Labeling::empty(num_nodes);
        for a in &self.state {
            lab.set(a.node, a.label);
        }
        lab
    }

    pub fn next_labeling(&self, num_nodes: usize) -> Labeling {
        let mut lab = self.labeling(num_nodes);
        lab.set(self.action.node, self.action.label);
        lab
    }
}

/// Which rule produced a training action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Greedy,
    Heuristic(Heuristic),
    Random,
    Forced,
}

/// Training-time action choice: with probability ε the argmax-Q action,
/// otherwise the argmax of M1, M2 or M3 or a uniform legal action, each with
/// probability (1−ε)/4. Ties are broken uniformly at random.
pub fn select_training_action<R: Rng>(
    params: &PolicyParams,
    instance: &CrfInstance,
    state: &EpisodeState,
    epsilon: f64,
    rng: &mut R,
) -> Result<(Action, Branch)> {
    let pass = forward(params, instance, state.labeling())?;
    let entropies = unary_entropies(instance);
    select_with_scores(instance, state, pass.scores(), &entropies, epsilon, rng)
}

pub(crate) fn select_with_scores<R: Rng>(
    instance: &CrfInstance,
    state: &EpisodeState,
    q: &[f64],
    entropies: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<(Action, Branch)> {
    let l = instance.num_labels();
    let free: Vec<usize> = state.free_nodes().collect();
    if free.is_empty() {
        return Err(Error::contract("episode is complete"));
    }
    if free.len() == 1 && l == 1 {
        return Ok((Action::new(free[0], 0), Branch::Forced));
    }
    let labeling = state.labeling();
    let legal = |k: usize| labeling.get(k / l).is_none();
    let pick = |values: &[f64], rng: &mut R| {
        let k = random_argmax(values, legal, rng).expect("a free node exists");
        Action::from_index(k, l)
    };
    if rng.random::<f64>() < epsilon {
        return Ok((pick(q, rng), Branch::Greedy));
    }
    Ok(match rng.random_range(0..4) {
        3 => {
            let node = free[rng.random_range(0..free.len())];
            (Action::new(node, rng.random_range(0..l)), Branch::Random)
        }
        k => {
            let which = Heuristic::ALL[k];
            let values = heuristic_scores(instance, labeling, entropies, which);
            (pick(&values, rng), Branch::Heuristic(which))
        }
    })
}

/// Max Q over the free actions of a labeling, `None` when complete.
fn max_q(params: &PolicyParams, instance: &CrfInstance, labeling: &Labeling) -> Result<Option<f64>> {
    let pass = forward(params, instance, labeling)?;
    Ok(pass.action_scores().into_iter().reduce(f64::max).filter(|v| v.is_finite()))
}

/// TD target `z = r` for terminal transitions, else `r + γ · max Q(s', ·)`.
pub fn q_target(params: &PolicyParams, instance: &CrfInstance, transition: &Transition, gamma: f64) -> Result<f64> {
    if transition.terminal || gamma == 0.0 {
        return Ok(transition.reward);
    }
    let next = transition.next_labeling(instance.num_nodes());
    let best = max_q(params, instance, &next)?.unwrap_or(0.0);
    Ok(transition.reward + gamma * best)
}

/// Squared TD loss of a batch and its gradient, averaged over the batch.
pub fn td_loss_and_grad(
    params: &PolicyParams,
    target_params: &PolicyParams,
    dataset: &Dataset,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, Vec<f64>, PolicyParams)> {
    let mut grads = PolicyParams::zeros(params.shape());
    let mut loss = 0.0;
    let mut errors = Vec::with_capacity(batch.len());
    let scale = 1.0 / batch.len().max(1) as f64;
    for t in batch {
        let inst = &dataset.items[t.instance].0;
        let z = q_target(target_params, inst, t, gamma)?;
        let pass = forward(params, inst, &t.labeling(inst.num_nodes()))?;
        let k = t.action.index(inst.num_labels());
        let q = pass.scores()[k];
        let err = q - z;
        if !err.is_finite() {
            return Err(Error::NonFinite("TD error".into()));
        }
        loss += scale * err * err;
        errors.push(err);
        let mut upstream = vec![0.0; pass.scores().len()];
        upstream[k] = 2.0 * err * scale;
        grads.add_scaled(&backward(params, &pass, inst, &upstream)?, 1.0);
    }
    Ok((loss, errors, grads))
}

/// Trains from `init` (fresh parameters seeded by `config.seed` when
/// `None`). Deterministic for a fixed config.
pub fn train_dqn(
    dataset: &Dataset,
    config: &DqnConfig,
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
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xD0_0D);
    let mut buffer: ReplayBuffer<Transition> = ReplayBuffer::new(shape.num_labels, config.buffer_capacity);
    let entropies: Vec<Vec<f64>> = dataset.items.iter().map(|(i, _)| unary_entropies(i)).collect();

    let planned = config.epochs * dataset.train.len() * config.episodes_per_graph;
    let ramp = Ramp {
        start: config.epsilon_start,
        end: config.epsilon_end,
        steps: if config.epsilon_decay_episodes == 0 {
            planned / 2
        } else {
            config.epsilon_decay_episodes
        },
    };
    let mut episode_counter = 0;
    let mut log = Vec::with_capacity(config.epochs);
    let mut epoch_seconds = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let target_snapshot = (config.target == TargetMode::EpochSnapshot).then(|| params.clone());
        let (mut losses, mut td_abs) = (Vec::new(), Vec::new());
        let (mut energies, mut accuracies) = (Vec::new(), Vec::new());
        let mut updates = 0;
        let mut epsilon = ramp.at(episode_counter);
        for idx in shuffled(&mut rng, &dataset.train) {
            let (inst, truth) = &dataset.items[idx];
            for _ in 0..config.episodes_per_graph {
                epsilon = ramp.at(episode_counter);
                episode_counter += 1;
                let mut state = EpisodeState::new(inst);
                let mut cache = ScoreCache::new(&params, inst, state.labeling())?;
                while !state.is_complete() {
                    let (action, _) =
                        select_with_scores(inst, &state, cache.scores(), &entropies[idx], epsilon, &mut rng)?;
                    let reward = state.reward(inst, action, config.scheme)?;
                    let chunk = route(inst, &state, action, reward, config.scheme)?;
                    let transition = Transition {
                        instance: idx,
                        state: state.actions().to_vec(),
                        action,
                        reward,
                        terminal: state.num_free() == 1,
                    };
                    buffer.push(chunk, action.label, transition);
                    state.apply(inst, action, config.scheme)?;
                    cache.apply(&params, inst, action.node, action.label)?;
                }
                energies.push(state.energy());
                accuracies.push(score(state.labeling(), truth)?.accuracy);

                if buffer.len() >= config.batch_size {
                    let steps = if config.updates_per_episode == 0 {
                        inst.num_nodes()
                    } else {
                        config.updates_per_episode
                    };
                    for _ in 0..steps {
                        let batch = buffer.sample(&mut rng, config.batch_size);
                        let target_params = target_snapshot.as_ref().unwrap_or(&params);
                        let (loss, errors, grads) =
                            td_loss_and_grad(&params, target_params, dataset, &batch, config.gamma)?;
                        if !loss.is_finite() {
                            return Err(Error::NonFinite("TD loss".into()));
                        }
                        opt.step(&mut params, &grads)?;
                        losses.push(loss);
                        td_abs.extend(errors.iter().map(|e| e.abs()));
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
            epsilon: Some(epsilon),
            td_abs_mean: Some(mean_var(&td_abs).0),
            root_entropy: None,
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
