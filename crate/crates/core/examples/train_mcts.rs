//! Distills tree search into the policy network, then labels held-out
//! instances both greedily and with a small search budget.

use clap::Parser;
use crfrl::crf::energy_of;
use crfrl::instances::{generate_dataset, DatasetSpec, InstanceSpec};
use crfrl::mcts::{mcts_infer, mcts_train, MctsConfig};
use crfrl::training::greedy_labeling;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 60)]
    count: usize,
    #[arg(long, default_value_t = 2)]
    episodes_per_graph: usize,
    #[arg(long, default_value_t = 50)]
    n_sim: usize,
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
    let config = MctsConfig {
        n_sim: args.n_sim,
        episodes_per_graph: args.episodes_per_graph,
        seed: args.seed,
        ..MctsConfig::default()
    };
    let outcome = mcts_train(&dataset, &config, None)?;
    let last = outcome.log.last().expect("one epoch");
    println!("cross-entropy {:.4} after {} episodes", last.loss_mean, last.episodes);

    let (mut greedy, mut searched) = (0.0, 0.0);
    for (instance, _) in dataset.validation_items() {
        greedy += energy_of(instance, &greedy_labeling(&outcome.params, instance)?.to_complete()?);
        searched += energy_of(instance, &mcts_infer(instance, &outcome.params, &config)?.to_complete()?);
    }
    let n = dataset.validation.len() as f64;
    println!("validation mean energy: greedy {:.3}, with search {:.3}", greedy / n, searched / n);
    Ok(())
}
