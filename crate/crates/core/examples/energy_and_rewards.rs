//! Builds a small CRF by hand, scores a labeling and walks one episode under
//! both reward schemes.

use crfrl::crf::{energy_of, CrfInstance, Hop1Clique, Hop2Clique, InstanceParts, PairwiseGate};
use crfrl::env::{Action, EpisodeState, RewardScheme};

fn main() -> crfrl::Result<()> {
    // A 2x2 grid with three labels: one detection box over the top row and a
    // nested count clique on the right column.
    let instance = CrfInstance::new(InstanceParts {
        num_labels: 3,
        edges: vec![(0, 1), (2, 3), (0, 2), (1, 3)],
        node_features: vec![vec![0.0]; 4],
        hypercolumns: vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]],
        unary: vec![
            vec![0.2, 1.5, 2.0],
            vec![0.4, 1.0, 2.2],
            vec![1.8, 0.3, 1.1],
            vec![1.6, 0.9, 0.6],
        ],
        gate: PairwiseGate { alpha: 0.5, beta: 0.5 },
        hop1: vec![Hop1Clique { members: vec![0, 1], label: 0, confidence: 0.9, weight: 1.0 }],
        hop2: vec![Hop2Clique { members: vec![1, 3], label: 2, penalty: 1.5, divisor: 2.0 }],
    })?;

    let labels = instance.unary_argmin();
    println!("unary argmin {labels:?} has energy {:.3}", energy_of(&instance, &labels));

    for scheme in [RewardScheme::EnergyDelta, RewardScheme::Sign] {
        let mut state = EpisodeState::new(&instance);
        let mut rewards = Vec::new();
        for (node, &label) in labels.iter().enumerate() {
            rewards.push(state.apply(&instance, Action::new(node, label), scheme)?);
        }
        let total: f64 = rewards.iter().sum();
        println!("{scheme:?}: rewards {rewards:?}, sum {total:.3}, final energy {:.3}", state.energy());
    }
    Ok(())
}
