//! Times greedy and search inference on growing grids and fits a line to the
//! greedy timings.

use clap::Parser;
use crfrl::harness::{bench, RunConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', default_value = "50,250,500,1000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value = "target/example-bench")]
    out: std::path::PathBuf,
}

fn main() -> crfrl::Result<()> {
    let args = Args::parse();
    let mut config = RunConfig::default();
    config.bench.sizes = args.sizes;
    config.bench.repeats = args.repeats;
    let report = bench(None, &config, &args.out)?;
    println!("{:>6} {:>9} {:>12} {:>12}", "nodes", "grid", "greedy s", "mcts s");
    for row in &report.rows {
        println!(
            "{:>6} {:>9} {:>12.4} {:>12.4}",
            row.nodes,
            format!("{}x{}", row.width, row.height),
            row.greedy_seconds,
            row.mcts_seconds
        );
    }
    let fit = report.greedy_fit;
    println!("greedy: {:.3e} s/node, intercept {:.3e} s, R^2 {:.4}", fit.slope, fit.intercept, fit.r2);
    Ok(())
}
