//! Command-line front end. Flags override values from `--config`, which in
//! turn override the built-in defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crfrl::env::RewardScheme;
use crfrl::harness::{self, Engine, RunConfig, Solver, Split, Trainer};
use crfrl::instances::{load_dataset, load_instances};
use crfrl::policy::load_params;
use crfrl::{Error, Result};

#[derive(Parser)]
#[command(name = "crfrl", version, about = "Learned sequential labeling for higher-order CRF MAP inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every trainer, solver and generator.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a TOML recipe.
    Generate {
        /// Recipe with `count`, `validation_fraction` and an `[instance]` table.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the recipe's instance seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a policy network.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trainer: Option<Trainer>,
        /// 1/energy or 2/sign.
        #[arg(long)]
        scheme: Option<RewardScheme>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from a params file, including its optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Label instances with a trained policy.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
        /// Instance or dataset file.
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        engine: Option<Engine>,
        /// Record per-step node selection probabilities.
        #[arg(long)]
        trace: bool,
    },
    /// Compare solvers and labelings on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated solver names.
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<Solver>>,
        /// Policy parameters for the `greedy` and `mcts` solvers.
        #[arg(long)]
        params: Option<PathBuf>,
        /// `name=path` of a labelings file written by `infer`; repeatable.
        #[arg(long = "labelings", value_parser = parse_named_path)]
        labelings: Vec<(String, PathBuf)>,
        #[arg(long)]
        split: Option<Split>,
        /// Also write the reward histogram (needs --params).
        #[arg(long)]
        histogram: bool,
    },
    /// Time greedy and search inference against graph size.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Write the final-round node embeddings of one instance.
    ExportEmbeddings {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        /// Which instance of the file.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected name=path")?;
    if name.is_empty() {
        return Err("empty name".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn load_policy(path: &Path) -> Result<crfrl::policy::PolicyParams> {
    Ok(load_params(path)?.0)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out, seed, count } => {
            let mut spec = harness::load_dataset_spec(&spec)?;
            if let Some(s) = seed {
                spec.instance.seed = s;
            }
            if let Some(c) = count {
                spec.count = c;
            }
            let s = harness::generate(&spec, &out)?;
            println!(
                "wrote {}: {} instances ({} train, {} validation), N = {}, |L| = {}, {} hop1 and {} hop2 cliques",
                out.display(),
                s.instances,
                s.train,
                s.validation,
                s.nodes,
                s.labels,
                s.hop1_cliques,
                s.hop2_cliques
            );
        }
        Command::Train {
            common,
            dataset,
            out,
            trainer,
            scheme,
            epochs,
            resume,
        } => {
            let mut cfg = common.load()?;
            if let Some(t) = trainer {
                cfg.trainer = t;
            }
            if scheme.is_some() {
                cfg.scheme = scheme;
            }
            if let Some(e) = epochs {
                cfg.dqn.epochs = e;
                cfg.mcts.epochs = e;
            }
            let ds = load_dataset(&dataset)?;
            let s = harness::train(&ds, &cfg, resume.as_deref(), &out)?;
            println!(
                "{} ({}) trained {} epochs, optimizer step {}, params in {}",
                s.trainer,
                s.scheme,
                s.epochs,
                s.optimizer_step,
                s.params.display()
            );
            if let Some(last) = s.last {
                println!("last epoch: loss {:.6}, episode energy {:.4}", last.loss_mean, last.episode_energy);
            }
        }
        Command::Infer {
            common,
            params,
            instances,
            out,
            engine,
            trace,
        } => {
            let mut cfg = common.load()?;
            if let Some(e) = engine {
                cfg.engine = e;
            }
            cfg.trace |= trace;
            let p = load_policy(&params)?;
            let items = load_instances(&instances)?;
            let o = harness::infer(&p, &items, &cfg, &out)?;
            let mean = o.rows.iter().map(|r| r.energy).sum::<f64>() / o.rows.len().max(1) as f64;
            println!("labeled {} instances with {}, mean energy {mean:.4}", o.rows.len(), cfg.engine);
        }
        Command::Eval {
            common,
            dataset,
            out,
            solvers,
            params,
            labelings,
            split,
            histogram,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = solvers {
                cfg.eval.solvers = s;
            }
            if let Some(s) = split {
                cfg.eval.split = s;
            }
            cfg.eval.reward_histogram |= histogram;
            let ds = load_dataset(&dataset)?;
            let p = params.as_deref().map(load_policy).transpose()?;
            let sets = labelings
                .into_iter()
                .map(|(name, path)| Ok((name, harness::load_labelings(&path)?)))
                .collect::<Result<Vec<_>>>()?;
            let report = harness::eval(&ds, &cfg, p.as_ref(), &sets, &out)?;
            println!("{:<12} {:<15} {:>10} {:>8} {:>8}", "source", "potentials", "energy", "acc", "gap");
            for r in &report.rows {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{:<12} {:<15} {:>10} {:>8} {:>8}",
                    r.source,
                    r.potentials,
                    f(r.mean_energy),
                    f(r.accuracy),
                    f(r.gap)
                );
            }
        }
        Command::Bench {
            common,
            out,
            params,
            sizes,
            repeats,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = sizes {
                cfg.bench.sizes = s;
            }
            if let Some(r) = repeats {
                cfg.bench.repeats = r;
            }
            let p = params.as_deref().map(load_policy).transpose()?;
            let report = harness::bench(p.as_ref(), &cfg, &out)?;
            for r in &report.rows {
                println!("N = {:>5}: greedy {:.4} s, mcts {:.4} s", r.nodes, r.greedy_seconds, r.mcts_seconds);
            }
            let f = report.greedy_fit;
            println!("greedy fit: {:.3e} s/node + {:.3e} s, R² = {:.4}", f.slope, f.intercept, f.r2);
        }
        Command::ExportEmbeddings {
            params,
            instances,
            index,
            out,
        } => {
            let p = load_policy(&params)?;
            let items = load_instances(&instances)?;
            let (inst, _) = items.get(index).ok_or_else(|| {
                Error::InvalidConfig(format!("{} has {} instances, no index {index}", instances.display(), items.len()))
            })?;
            let rows = harness::export_embeddings(&p, inst, &out)?;
            println!("wrote {} x {} embeddings to {}", rows.len(), p.shape().embed_dim, out.display());
        }
    }
    Ok(())
}

/// Exit codes: 2 usage (from clap), 3 config or parse, 4 io, 5 data
/// (shape, instance or contract), 6 numeric, 1 anything else.
fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" | "parse" => 3,
        "io" => 4,
        "shape" | "instance" | "contract" | "unsupported" => 5,
        "numeric" => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
