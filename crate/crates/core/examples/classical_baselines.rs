//! Runs every classical solver on one instance and prints energy and time.

use crfrl::baselines::{brute_force_map, icm, loopy_bp_map, simulated_annealing, unary_argmin, AnnealSchedule, BpConfig};
use crfrl::crf::PotentialMask;
use crfrl::instances::{generate_dataset, DatasetSpec, InstanceSpec};

fn main() -> crfrl::Result<()> {
    let dataset = generate_dataset(&DatasetSpec {
        instance: InstanceSpec { width: 4, height: 3, num_labels: 3, hop2_cliques: 1, seed: 5, ..InstanceSpec::default() },
        count: 1,
        validation_fraction: 0.0,
    })?;
    let instance = &dataset.items[0].0;
    let start = instance.unary_argmin();
    let results = [
        unary_argmin(instance),
        icm(instance, &start)?,
        simulated_annealing(instance, &start, &AnnealSchedule::default(), 0)?,
        brute_force_map(instance, 1 << 20)?,
    ];
    for r in &results {
        println!("{:<12} energy {:8.4}  {:>5} iterations  {:.4}s", r.solver, r.energy, r.iterations, r.seconds);
    }
    // Belief propagation handles unary, pairwise and HOP1 terms only.
    let no_hop2 = instance.masked(PotentialMask { hop2: false, ..PotentialMask::ALL });
    let bp = loopy_bp_map(&no_hop2, &BpConfig::default())?;
    let exact = brute_force_map(&no_hop2, 1 << 20)?;
    println!("without HOP2: bp {:.4}, brute force {:.4}", bp.energy, exact.energy);
    Ok(())
}
