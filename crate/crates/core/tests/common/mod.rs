//! Random instance builders shared by the integration tests.
#![allow(dead_code)]

use crfrl::crf::{CrfInstance, Hop1Clique, Hop2Clique, InstanceParts, PairwiseGate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which potential families a random instance carries.
#[derive(Clone, Copy, Debug)]
pub struct Families {
    pub pairwise: bool,
    pub hop1: bool,
    pub hop2: bool,
}

pub const ALL: Families = Families {
    pairwise: true,
    hop1: true,
    hop2: true,
};

fn unit_hypercolumn(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    v.into_iter().map(|x| x / norm).collect()
}

fn random_members(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let size = rng.random_range(1..=n.min(6));
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(size);
    all
}

fn parts(
    rng: &mut ChaCha8Rng,
    n: usize,
    l: usize,
    edges: Vec<(usize, usize)>,
    hop1: Vec<Hop1Clique>,
    hop2: Vec<Hop2Clique>,
    alpha: f64,
) -> InstanceParts {
    let f = l + 3;
    InstanceParts {
        num_labels: l,
        edges,
        node_features: (0..n).map(|_| (0..f).map(|_| rng.random_range(0.0..1.0)).collect()).collect(),
        hypercolumns: (0..n).map(|_| unit_hypercolumn(rng, 3)).collect(),
        unary: (0..n).map(|_| (0..l).map(|_| rng.random_range(0.0..3.0)).collect()).collect(),
        gate: PairwiseGate {
            alpha,
            beta: rng.random_range(0.3..1.2),
        },
        hop1,
        hop2,
    }
}

fn random_hop1(rng: &mut ChaCha8Rng, members: Vec<usize>, l: usize) -> Hop1Clique {
    Hop1Clique {
        members,
        label: rng.random_range(0..l),
        confidence: rng.random_range(0.3..1.0),
        weight: rng.random_range(0.1..1.5),
    }
}

/// Arbitrary graph with up to `max_n` nodes and `max_l` labels.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_l: usize, fam: Families) -> CrfInstance {
    let n = rng.random_range(1..=max_n);
    let l = rng.random_range(2..=max_l);
    let mut edges = Vec::new();
    if fam.pairwise {
        let p = rng.random_range(0.05f64..0.5).min(3.0 / n as f64 + 0.05);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
    }
    let hop1 = if fam.hop1 {
        (0..rng.random_range(0..=3)).map(|_| {
            let m = random_members(rng, n);
            random_hop1(rng, m, l)
        }).collect()
    } else {
        Vec::new()
    };
    let hop2 = if fam.hop2 {
        (0..rng.random_range(0..=3))
            .map(|_| Hop2Clique {
                members: random_members(rng, n),
                label: rng.random_range(0..l),
                penalty: rng.random_range(0.5..3.0),
                divisor: rng.random_range(1.2..3.0),
            })
            .collect()
    } else {
        Vec::new()
    };
    let alpha = rng.random_range(0.2..1.5);
    CrfInstance::new(parts(rng, n, l, edges, hop1, hop2, alpha)).unwrap()
}

/// Instance whose factor graph, with one auxiliary node per HOP1 clique
/// joined to every member, is a forest. Every instance with at least two
/// nodes carries at least one HOP1 clique of two or more members.
pub fn random_tree_instance(rng: &mut ChaCha8Rng, max_n: usize, max_l: usize) -> CrfInstance {
    let n = rng.random_range(2..=max_n);
    let l = rng.random_range(2..=max_l);
    // Union-find over the variable nodes.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut edges = Vec::new();
    let mut hop1 = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    // Grow a random forest, then join components with cliques.
    // The last node in `order` stays alone so the first clique always finds
    // two components to join.
    for k in 1..n - 1 {
        if rng.random_bool(0.6) {
            let a = order[k];
            let b = order[rng.random_range(0..k)];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    let cliques = rng.random_range(1..=3);
    for c in 0..cliques {
        let mut reps: Vec<usize> = Vec::new();
        let mut cand: Vec<usize> = (0..n).collect();
        cand.shuffle(rng);
        let want = rng.random_range(2..=4);
        for v in cand {
            let r = find(&mut parent, v);
            if reps.iter().all(|&u| find(&mut parent, u) != r) {
                reps.push(v);
            }
            if reps.len() == want {
                break;
            }
        }
        if reps.len() < 2 {
            assert!(c > 0, "first clique always spans two components");
            continue;
        }
        for &v in &reps[1..] {
            let (ra, rb) = (find(&mut parent, v), find(&mut parent, reps[0]));
            parent[ra] = rb;
        }
        hop1.push(random_hop1(rng, reps, l));
    }
    let alpha = rng.random_range(0.2..1.5);
    CrfInstance::new(parts(rng, n, l, edges, hop1, Vec::new(), alpha)).unwrap()
}

/// Copy of `instance` with nodes renamed by `perm` (old index `i` becomes
/// `perm[i]`).
pub fn permute(instance: &CrfInstance, perm: &[usize]) -> CrfInstance {
    let p = instance.parts();
    let n = perm.len();
    let mut inv = vec![0; n];
    for (i, &j) in perm.iter().enumerate() {
        inv[j] = i;
    }
    let pick = |v: &Vec<Vec<f64>>| (0..n).map(|j| v[inv[j]].clone()).collect::<Vec<_>>();
    CrfInstance::new(InstanceParts {
        num_labels: p.num_labels,
        edges: p.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
        node_features: pick(&p.node_features),
        hypercolumns: pick(&p.hypercolumns),
        unary: pick(&p.unary),
        gate: p.gate,
        hop1: p
            .hop1
            .iter()
            .map(|c| Hop1Clique {
                members: c.members.iter().map(|&m| perm[m]).collect(),
                ..c.clone()
            })
            .collect(),
        hop2: p
            .hop2
            .iter()
            .map(|c| Hop2Clique {
                members: c.members.iter().map(|&m| perm[m]).collect(),
                ..c.clone()
            })
            .collect(),
    })
    .unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, instance: &CrfInstance) -> Vec<usize> {
    (0..instance.num_nodes())
        .map(|_| rng.random_range(0..instance.num_labels()))
        .collect()
}

/// A random complete action order: a node permutation with random labels.
pub fn random_actions(rng: &mut ChaCha8Rng, instance: &CrfInstance) -> Vec<crfrl::env::Action> {
    let mut nodes: Vec<usize> = (0..instance.num_nodes()).collect();
    nodes.shuffle(rng);
    nodes
        .into_iter()
        .map(|i| crfrl::env::Action::new(i, rng.random_range(0..instance.num_labels())))
        .collect()
}
