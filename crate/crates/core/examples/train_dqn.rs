//! Trains the policy network with Q-learning on small grids and compares its
//! greedy rollouts with exhaustive search.

use clap::Parser;
use crfrl::baselines::{brute_force_map, icm_improvable};
use crfrl::crf::energy_of;
use crfrl::dqn::{train_dqn, DqnConfig};
use crfrl::env::RewardScheme;
use crfrl::instances::{generate_dataset, DatasetSpec, InstanceSpec};
use crfrl::training::greedy_labeling;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 5)]
    episodes_per_graph: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value = "sign")]
    scheme: RewardScheme,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> crfrl::Result<()> {
    let args = Args::parse();
    let dataset = generate_dataset(&DatasetSpec {
        instance: InstanceSpec { width: 3, height: 3, num_labels: 3, seed: args.seed, ..InstanceSpec::default() },
        count: args.count,
        validation_fraction: 0.2,
    })?;
    let config = DqnConfig {
        gamma: args.gamma,
        scheme: args.scheme,
        episodes_per_graph: args.episodes_per_graph,
        seed: args.seed,
        ..DqnConfig::default()
    };
    let outcome = train_dqn(&dataset, &config, None)?;
    for log in &outcome.log {
        println!(
            "epoch {}: {} episodes, loss {:.4}, episode energy {:.3}",
            log.epoch, log.episodes, log.loss_mean, log.episode_energy
        );
    }

    let (mut learned, mut exact, mut stuck) = (0.0, 0.0, 0);
    for (instance, _) in dataset.validation_items() {
        let labels = greedy_labeling(&outcome.params, instance)?.to_complete()?;
        learned += energy_of(instance, &labels);
        exact += brute_force_map(instance, 1 << 20)?.energy;
        stuck += usize::from(!icm_improvable(instance, &labels, 1e-9));
    }
    let n = dataset.validation.len();
    println!(
        "validation: mean energy {:.3} vs optimum {:.3}, {stuck}/{n} ICM-unimprovable",
        learned / n as f64,
        exact / n as f64
    );
    Ok(())
}
