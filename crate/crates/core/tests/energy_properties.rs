mod common;

use std::path::Path;

use common::{permute, random_actions, random_instance, random_labels, rng, ALL};
use crfrl::crf::{energy_of, partial_energy, total_energy, Grounding, Labeling};
use crfrl::env::{EpisodeState, RewardScheme};
use crfrl::instances::{instance_to_string, parse_instances};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn energy_rewards_telescope(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 30, 4, ALL);
        let mut state = EpisodeState::new(&inst);
        let mut sum = 0.0;
        for a in random_actions(&mut r, &inst) {
            sum += state.apply(&inst, a, RewardScheme::EnergyDelta).unwrap();
        }
        let e = total_energy(&inst, state.labeling()).unwrap();
        prop_assert!((sum + e).abs() < 1e-9, "sum {} energy {}", sum, e);
    }

    #[test]
    fn incremental_energy_matches_recomputation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 25, 4, ALL);
        let mut state = EpisodeState::new(&inst);
        prop_assert_eq!(state.energy(), 0.0);
        for a in random_actions(&mut r, &inst) {
            state.apply(&inst, a, RewardScheme::EnergyDelta).unwrap();
            let full = partial_energy(&inst, state.labeling());
            prop_assert!((state.energy() - full).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_reward_is_strict_local_optimality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 15, 4, ALL);
        let mut state = EpisodeState::new(&inst);
        for a in random_actions(&mut r, &inst) {
            let base = partial_energy(&inst, state.labeling());
            let delta = |label: usize| {
                let mut lab = state.labeling().clone();
                lab.set(a.node, label);
                partial_energy(&inst, &lab) - base
            };
            let mine = delta(a.label);
            let strict = (0..inst.num_labels()).filter(|&l| l != a.label).all(|l| mine < delta(l));
            let got = state.apply(&inst, a, RewardScheme::Sign).unwrap();
            prop_assert_eq!(got, if strict { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn relabel_and_unassign_track_full_energy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 20, 4, ALL);
        let labels = random_labels(&mut r, &inst);
        let mut g = Grounding::from_labeling(&inst, &Labeling::from_labels(&labels));
        prop_assert!((g.energy() - energy_of(&inst, &labels)).abs() < 1e-9);
        let mut cur = labels.clone();
        for _ in 0..20 {
            let i = rand::Rng::random_range(&mut r, 0..inst.num_nodes());
            let l = rand::Rng::random_range(&mut r, 0..inst.num_labels());
            let predicted = g.relabel_delta(&inst, i, l);
            let before = energy_of(&inst, &cur);
            g.relabel(&inst, i, l);
            cur[i] = l;
            prop_assert!((energy_of(&inst, &cur) - before - predicted).abs() < 1e-9);
            prop_assert!((g.energy() - energy_of(&inst, &cur)).abs() < 1e-9);
        }
        let i = rand::Rng::random_range(&mut r, 0..inst.num_nodes());
        g.unassign(&inst, i);
        let mut partial = Labeling::from_labels(&cur);
        partial.clear(i);
        prop_assert!((g.energy() - partial_energy(&inst, &partial)).abs() < 1e-9);
    }

    #[test]
    fn energy_is_invariant_under_node_renaming(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 20, 4, ALL);
        let n = inst.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let renamed = permute(&inst, &perm);
        let labels = random_labels(&mut r, &inst);
        let mut moved = vec![0; n];
        for i in 0..n {
            moved[perm[i]] = labels[i];
        }
        prop_assert!((energy_of(&inst, &labels) - energy_of(&renamed, &moved)).abs() < 1e-9);
    }

    #[test]
    fn instance_text_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 20, 4, ALL);
        let truth = Labeling::from_labels(&random_labels(&mut r, &inst));
        let text = instance_to_string(&inst, Some(&truth)).unwrap();
        let back = parse_instances(Path::new("mem"), &text).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].0.parts(), inst.parts());
        prop_assert_eq!(back[0].1.as_ref(), Some(&truth));
    }
}
