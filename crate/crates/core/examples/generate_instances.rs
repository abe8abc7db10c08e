//! Generates a synthetic grid dataset, prints its shape and writes it to disk.

use std::path::PathBuf;

use clap::Parser;
use crfrl::instances::{generate_dataset, load_dataset, save_dataset, DatasetSpec, InstanceSpec};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 6)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    labels: usize,
    #[arg(long, default_value_t = 1)]
    hop2: usize,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "target/example-data/grid.jsonl")]
    out: PathBuf,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let spec = DatasetSpec {
        instance: InstanceSpec {
            width: args.width,
            height: args.height,
            num_labels: args.labels,
            hop2_cliques: args.hop2,
            seed: args.seed,
            ..InstanceSpec::default()
        },
        count: args.count,
        validation_fraction: 0.2,
    };
    let dataset = generate_dataset(&spec)?;
    let (first, truth) = &dataset.items[0];
    println!(
        "{} instances, {} train / {} validation",
        dataset.len(),
        dataset.train.len(),
        dataset.validation.len()
    );
    println!(
        "instance 0: {} nodes, {} edges, {} HOP1 and {} HOP2 cliques, truth {:?}",
        first.num_nodes(),
        first.edges().len(),
        first.hop1().len(),
        first.hop2().len(),
        truth.to_complete()?
    );
    if let Some(dir) = args.out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_dataset(&args.out, &dataset)?;
    let back = load_dataset(&args.out)?;
    assert_eq!(back.len(), dataset.len());
    println!("wrote {}", args.out.display());
    Ok(())
}
