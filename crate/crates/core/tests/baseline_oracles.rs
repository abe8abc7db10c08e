//! The classical solvers checked against exhaustive search.

mod common;

use common::{random_instance, random_labels, random_tree_instance, rng, ALL};
use crfrl::baselines::{brute_force_map, icm, loopy_bp_map, simulated_annealing, AnnealSchedule, BpConfig};
use crfrl::crf::energy_of;

const CAP: u128 = 1 << 22;

#[test]
fn bp_is_exact_on_trees() {
    let mut r = rng(2024);
    let mut with_hop1 = 0;
    for k in 0..100 {
        let inst = random_tree_instance(&mut r, 12, 3);
        with_hop1 += usize::from(inst.hop1().iter().any(|c| c.members.len() >= 2));
        let exact = brute_force_map(&inst, CAP).unwrap();
        let bp = loopy_bp_map(&inst, &BpConfig::default()).unwrap();
        assert!(
            (bp.energy - exact.energy).abs() < 1e-9,
            "instance {k}: bp {} brute {}",
            bp.energy,
            exact.energy
        );
    }
    assert_eq!(with_hop1, 100);
}

#[test]
fn local_search_never_beats_exhaustive_search() {
    let mut r = rng(77);
    let schedule = AnnealSchedule { sweeps: 100, ..AnnealSchedule::default() };
    for k in 0..100u64 {
        let inst = random_instance(&mut r, 10, 3, ALL);
        let exact = brute_force_map(&inst, CAP).unwrap();
        let start = random_labels(&mut r, &inst);
        let start_energy = energy_of(&inst, &start);
        let local = icm(&inst, &start).unwrap();
        let sa = simulated_annealing(&inst, &start, &schedule, k).unwrap();
        for res in [&local, &sa] {
            assert!(res.energy >= exact.energy - 1e-9, "{} beat brute force on {k}", res.solver);
            assert!(res.energy <= start_energy + 1e-9, "{} worsened its start on {k}", res.solver);
            assert!((energy_of(&inst, &res.labels) - res.energy).abs() < 1e-9);
        }
    }
}
