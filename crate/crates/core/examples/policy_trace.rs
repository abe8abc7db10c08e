//! Labels an instance with a briefly trained network and prints the order in
//! which nodes were chosen, then the final-round node embeddings.

use crfrl::dqn::{train_dqn, DqnConfig};
use crfrl::env::rollout_with_trace;
use crfrl::harness::node_embeddings;
use crfrl::instances::{generate_dataset, DatasetSpec, InstanceSpec};
use crfrl::policy::GreedyPolicy;

fn main() -> crfrl::Result<()> {
    let dataset = generate_dataset(&DatasetSpec {
        instance: InstanceSpec { width: 4, height: 3, num_labels: 3, seed: 2, ..InstanceSpec::default() },
        count: 30,
        validation_fraction: 0.2,
    })?;
    let config = DqnConfig { gamma: 0.0, episodes_per_graph: 3, seed: 2, embed_dim: 8, ..DqnConfig::default() };
    let params = train_dqn(&dataset, &config, None)?.params;

    let (instance, truth) = &dataset.items[dataset.validation[0]];
    let (labeling, trace) = rollout_with_trace(instance, &mut GreedyPolicy::new(&params))?;
    for step in &trace {
        let p = step.probabilities[step.node];
        println!("step {:>2}: node {:>2} <- label {} (p = {p:.3})", step.step, step.node, step.label);
    }
    println!("labels {:?}", labeling.to_complete()?);
    println!("truth  {:?}", truth.to_complete()?);

    for (node, e) in node_embeddings(&params, instance)?.iter().enumerate().take(4) {
        let shown: Vec<String> = e.iter().map(|x| format!("{x:+.3}")).collect();
        println!("embedding {node}: [{}]", shown.join(", "));
    }
    Ok(())
}
