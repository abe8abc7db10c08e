mod common;

use common::{random_actions, random_instance, rng, ALL};
use crfrl::crf::{partial_energy, CrfInstance, InstanceParts, Labeling, PairwiseGate};
use crfrl::env::RewardScheme;
use crfrl::mcts::{policy_argmax, Search, SearchTree};
use crfrl::policy::{PolicyParams, PolicyShape};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn visit_counts_add_up_at_every_node(
        seed in any::<u64>(),
        n_sim in prop::sample::select(vec![1usize, 10, 100]),
        depth in 1usize..6,
        sign in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 15, 4, ALL);
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 4), seed);
        let scheme = if sign { RewardScheme::Sign } else { RewardScheme::EnergyDelta };
        let mut search = Search::new(&inst, &params, scheme, true).unwrap();
        // Random root: commit a random prefix of actions first.
        let actions = random_actions(&mut r, &inst);
        let prefix = r.random_range(0..actions.len());
        for &a in &actions[..prefix] {
            search.commit(a).unwrap();
        }
        let policy = search.search(n_sim, depth, &mut r).unwrap();
        let tree = search.tree();
        prop_assert!(tree.counts_consistent());
        prop_assert_eq!(tree.node(tree.root()).visits, n_sim as u64);
        let total: f64 = policy.iter().map(|&(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12, "policy sums to {}", total);
        for &(a, _) in &policy {
            prop_assert!(search.state().check_legal(&inst, a).is_ok());
        }
    }

    #[test]
    fn reused_subtree_stays_consistent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 12, 3, ALL);
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 4), seed);
        let mut search = Search::new(&inst, &params, RewardScheme::Sign, true).unwrap();
        while !search.state().is_complete() {
            let policy = search.search(20, 3, &mut r).unwrap();
            let a = policy_argmax(&policy).unwrap();
            let kept = search.tree().node(search.tree().root()).edge(a).map(|e| e.visits).unwrap();
            search.commit(a).unwrap();
            let tree = search.tree();
            prop_assert!(tree.counts_consistent());
            // Every simulation through the chosen edge that went deeper left
            // one visit at the new root.
            prop_assert!(tree.node(tree.root()).visits <= kept);
        }
    }
}

#[test]
fn uniform_prior_and_zero_rewards_spread_visits_evenly() {
    let inst = CrfInstance::new(InstanceParts {
        num_labels: 2,
        edges: vec![],
        node_features: vec![vec![0.0]],
        hypercolumns: vec![vec![0.0]],
        unary: vec![vec![0.0, 0.0]],
        gate: PairwiseGate { alpha: 0.0, beta: 0.0 },
        hop1: vec![],
        hop2: vec![],
    })
    .unwrap();
    let mut params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 4), 0);
    for (_, t) in params.tensors_mut() {
        t.fill(0.0);
    }
    let mut search = Search::new(&inst, &params, RewardScheme::EnergyDelta, false).unwrap();
    let n = 10_000;
    let policy = search.search(n, 1, &mut rng(0)).unwrap();
    assert_eq!(policy.len(), 2);
    let counts: Vec<f64> = policy.iter().map(|&(_, p)| p * n as f64).collect();
    let expected = n as f64 / 2.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // One degree of freedom, p = 0.001.
    assert!(chi2 < 10.83, "{counts:?}");
}

/// Edge taken by the last simulation at `id`: the one whose count grew.
fn grown_edge(before: &SearchTree, after: &SearchTree, id: usize) -> Option<(usize, usize)> {
    let old = before.nodes().get(id).map_or(&[][..], |n| &n.edges[..]);
    after.node(id).edges.iter().enumerate().find_map(|(k, e)| {
        let prev = old.get(k).map_or(0, |o| o.visits);
        (e.visits == prev + 1).then_some((k, e.child))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn backups_add_each_edge_its_return_to_go(seed in any::<u64>(), depth in 1usize..6) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 12, 3, ALL);
        let params = PolicyParams::init(PolicyShape::for_instance(&inst, 2, 4), seed);
        let mut search = Search::new(&inst, &params, RewardScheme::EnergyDelta, true).unwrap();
        search.search(5, depth, &mut r).unwrap();
        let before = search.tree().clone();
        let returns = search.run_simulation(depth, &mut r).unwrap();
        let after = search.tree();
        prop_assert_eq!(returns.len(), depth.min(inst.num_nodes()));
        // Follow the path and replay its actions.
        let mut id = after.root();
        let mut lab = Labeling::empty(inst.num_nodes());
        let mut energies = vec![0.0];
        for &g in &returns {
            let (k, child) = grown_edge(&before, after, id).expect("path continues");
            let edge = after.node(id).edges[k];
            let prev = before.nodes().get(id).and_then(|n| n.edges.get(k)).map_or(0.0, |e| e.total);
            prop_assert!((edge.total - prev - g).abs() < 1e-12);
            lab.set(edge.action.node, edge.action.label);
            energies.push(partial_energy(&inst, &lab));
            id = child;
        }
        // The return of edge k is the energy drop from step k to the leaf.
        let leaf = *energies.last().unwrap();
        for (k, &g) in returns.iter().enumerate() {
            prop_assert!((g - (energies[k] - leaf)).abs() < 1e-9, "edge {}: {} vs {}", k, g, energies[k] - leaf);
        }
    }
}
