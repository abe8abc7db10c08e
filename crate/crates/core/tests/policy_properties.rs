mod common;

use common::{permute, random_actions, random_instance, rng, ALL};
use crfrl::crf::{CrfInstance, Labeling};
use crfrl::policy::{backward, forward, PolicyParams, PolicyShape, ScoreCache};
use proptest::prelude::*;
use rand::Rng;

fn params_for(inst: &CrfInstance, rounds: usize, p: usize, seed: u64) -> PolicyParams {
    PolicyParams::init(PolicyShape::for_instance(inst, rounds, p), seed)
}

/// Random partial labeling covering roughly half the nodes.
fn random_partial(r: &mut rand_chacha::ChaCha8Rng, inst: &CrfInstance) -> Labeling {
    let mut lab = Labeling::empty(inst.num_nodes());
    for a in random_actions(r, inst) {
        if r.random_bool(0.5) {
            lab.set(a.node, a.label);
        }
    }
    lab
}

/// Nodes within `hops` edges of `src`.
fn ball(inst: &CrfInstance, src: usize, hops: usize) -> Vec<bool> {
    let mut seen = vec![false; inst.num_nodes()];
    seen[src] = true;
    let mut frontier = vec![src];
    for _ in 0..hops {
        let mut next = Vec::new();
        for &u in &frontier {
            for nb in inst.neighbors(u) {
                if !seen[nb.node] {
                    seen[nb.node] = true;
                    next.push(nb.node);
                }
            }
        }
        frontier = next;
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_permutation_equivariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 20, 4, ALL);
        let params = params_for(&inst, 3, 6, seed);
        let n = inst.num_nodes();
        let l = inst.num_labels();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let lab = random_partial(&mut r, &inst);
        let mut moved = Labeling::empty(n);
        for (i, &to) in perm.iter().enumerate() {
            if let Some(y) = lab.get(i) {
                moved.set(to, y);
            }
        }
        let a = forward(&params, &inst, &lab).unwrap();
        let b = forward(&params, &permute(&inst, &perm), &moved).unwrap();
        for (i, &to) in perm.iter().enumerate() {
            for k in 0..l {
                let (x, y) = (a.scores()[i * l + k], b.scores()[to * l + k]);
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "node {} label {}: {} vs {}", i, k, x, y);
            }
        }
    }

    #[test]
    fn a_label_change_reaches_only_k_hops(seed in any::<u64>(), rounds in 1usize..4) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 25, 3, ALL);
        let params = params_for(&inst, rounds, 5, seed);
        let lab = random_partial(&mut r, &inst);
        let node = r.random_range(0..inst.num_nodes());
        let mut other = lab.clone();
        match lab.get(node) {
            Some(_) => other.clear(node),
            None => other.set(node, 0),
        }
        let a = forward(&params, &inst, &lab).unwrap();
        let b = forward(&params, &inst, &other).unwrap();
        let reach = ball(&inst, node, rounds);
        let l = inst.num_labels();
        for i in (0..inst.num_nodes()).filter(|&i| !reach[i]) {
            prop_assert_eq!(&a.scores()[i * l..(i + 1) * l], &b.scores()[i * l..(i + 1) * l]);
        }
    }

    #[test]
    fn cache_tracks_full_forward(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 20, 4, ALL);
        let params = params_for(&inst, 3, 6, seed);
        let mut lab = Labeling::empty(inst.num_nodes());
        let mut cache = ScoreCache::new(&params, &inst, &lab).unwrap();
        for a in random_actions(&mut r, &inst) {
            cache.apply(&params, &inst, a.node, a.label).unwrap();
            lab.set(a.node, a.label);
            let full = forward(&params, &inst, &lab).unwrap();
            prop_assert_eq!(cache.scores(), full.scores());
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(17);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let inst = random_instance(&mut r, 10, 3, ALL);
        let mut params = params_for(&inst, 2, 4, trial);
        let lab = random_partial(&mut r, &inst);
        let upstream: Vec<f64> = (0..inst.num_nodes() * inst.num_labels())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let objective = |p: &PolicyParams| -> f64 {
            let pass = forward(p, &inst, &lab).unwrap();
            pass.scores().iter().zip(&upstream).map(|(s, u)| s * u).sum()
        };
        let pass = forward(&params, &inst, &lab).unwrap();
        let grads = backward(&params, &pass, &inst, &upstream).unwrap();
        let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();
        let h = 1e-5;
        for (t, g) in analytic.iter().enumerate() {
            for (k, &gk) in g.iter().enumerate() {
                let orig = params.tensors()[t].2[k];
                params.tensors_mut()[t].1[k] = orig + h;
                let up = objective(&params);
                params.tensors_mut()[t].1[k] = orig - h;
                let down = objective(&params);
                params.tensors_mut()[t].1[k] = orig;
                let numeric = (up - down) / (2.0 * h);
                let err = (numeric - gk).abs() / (1.0 + numeric.abs().max(gk.abs()));
                worst = worst.max(err);
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}
