//! `generate`, `train`, `infer` and `export-embeddings`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::crf::{total_energy, CrfInstance, Labeling};
use crate::dqn::train_dqn;
use crate::env::{rollout_with_trace, RewardScheme};
use crate::error::{Error, Result};
use crate::instances::{generate_dataset, save_dataset, score, Dataset, DatasetSpec};
use crate::mcts::{mcts_infer, mcts_train};
use crate::policy::{forward, load_params, save_params, GreedyPolicy, PolicyParams};
use crate::training::{greedy_labeling, EpochLog, TrainOutcome};

use super::config::{Engine, RunConfig, Trainer};
use super::tables::{append_timing, ensure_dir, read_jsonl, write_json, write_jsonl, write_table, TimingRecord};

pub const PARAMS_FILE: &str = "params.json";
pub const LABELINGS_FILE: &str = "labelings.jsonl";

/// Reads a dataset recipe (`count`, `validation_fraction`, `[instance]`).
pub fn load_dataset_spec(path: &Path) -> Result<DatasetSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_spec(&text).map_err(|e| match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_dataset_spec(text: &str) -> Result<DatasetSpec> {
    let spec: DatasetSpec = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    spec.instance.validate()?;
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub instances: usize,
    pub nodes: usize,
    pub labels: usize,
    pub hop1_cliques: usize,
    pub hop2_cliques: usize,
    pub train: usize,
    pub validation: usize,
}

impl GenerateSummary {
    pub fn of(dataset: &Dataset) -> Self {
        let first = dataset.items.first().map(|(i, _)| i);
        Self {
            instances: dataset.len(),
            nodes: first.map_or(0, |i| i.num_nodes()),
            labels: first.map_or(0, |i| i.num_labels()),
            hop1_cliques: dataset.items.iter().map(|(i, _)| i.hop1().len()).sum(),
            hop2_cliques: dataset.items.iter().map(|(i, _)| i.hop2().len()).sum(),
            train: dataset.train.len(),
            validation: dataset.validation.len(),
        }
    }
}

/// Generates the dataset described by `spec` and writes it to `out`.
pub fn generate(spec: &DatasetSpec, out: &Path) -> Result<GenerateSummary> {
    let dataset = generate_dataset(spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_dataset(out, &dataset)?;
    Ok(GenerateSummary::of(&dataset))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub trainer: Trainer,
    pub scheme: RewardScheme,
    pub epochs: usize,
    pub optimizer_step: u64,
    pub last: Option<EpochLog>,
    pub params: PathBuf,
}

/// Trains with the configured trainer, optionally resuming from a params
/// file that carries optimizer state. Writes `params.json`, the epoch log
/// as `train_log.{csv,json}` and epoch timings to the timing sidecar.
pub fn train(dataset: &Dataset, config: &RunConfig, resume: Option<&Path>, out: &Path) -> Result<TrainSummary> {
    let cfg = config.resolved();
    ensure_dir(out)?;
    let init = resume.map(load_params).transpose()?;
    let (outcome, scheme): (TrainOutcome, RewardScheme) = match cfg.trainer {
        Trainer::Dqn => (train_dqn(dataset, &cfg.dqn, init)?, cfg.dqn.scheme),
        Trainer::Mcts => (mcts_train(dataset, &cfg.mcts, init)?, cfg.mcts.scheme),
    };
    let params_path = out.join(PARAMS_FILE);
    save_params(&params_path, &outcome.params, Some(&outcome.optimizer))?;
    write_table(out, "train_log", &outcome.log)?;
    let timing: Vec<TimingRecord> = outcome
        .epoch_seconds
        .iter()
        .enumerate()
        .map(|(k, &s)| TimingRecord {
            command: "train".into(),
            phase: format!("epoch {k}"),
            seconds: s,
        })
        .collect();
    append_timing(out, &timing)?;
    Ok(TrainSummary {
        trainer: cfg.trainer,
        scheme,
        epochs: outcome.log.len(),
        optimizer_step: outcome.optimizer.step,
        last: outcome.log.last().cloned(),
        params: params_path,
    })
}

/// One inferred labeling, as stored in `labelings.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelingRecord {
    pub instance: usize,
    pub labels: Vec<usize>,
    pub energy: f64,
}

pub fn load_labelings(path: &Path) -> Result<Vec<LabelingRecord>> {
    read_jsonl(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferRow {
    pub instance: usize,
    pub nodes: usize,
    pub energy: f64,
    pub accuracy: Option<f64>,
    pub mean_iou: Option<f64>,
}

/// Long-format trace: one row per (step, still-free node).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub instance: usize,
    pub step: usize,
    pub chosen_node: usize,
    pub chosen_label: usize,
    pub node: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferOutput {
    pub labelings: Vec<LabelingRecord>,
    pub rows: Vec<InferRow>,
    pub trace: Option<Vec<TraceRow>>,
}

/// Labels every instance with the configured engine. Writes
/// `labelings.jsonl`, `infer.{csv,json}` and, when tracing, `trace.{csv,json}`.
pub fn infer(
    params: &PolicyParams,
    instances: &[(CrfInstance, Option<Labeling>)],
    config: &RunConfig,
    out: &Path,
) -> Result<InferOutput> {
    let cfg = config.resolved();
    if cfg.trace && cfg.engine != Engine::Greedy {
        return Err(Error::InvalidConfig("policy traces are only recorded by the greedy engine".into()));
    }
    ensure_dir(out)?;
    let mut labelings = Vec::with_capacity(instances.len());
    let mut rows = Vec::with_capacity(instances.len());
    let mut trace = cfg.trace.then(Vec::new);
    let mut timing = Vec::with_capacity(instances.len());
    for (k, (inst, truth)) in instances.iter().enumerate() {
        params.check_compatible(inst)?;
        let started = Instant::now();
        let lab = match (cfg.engine, trace.as_mut()) {
            (Engine::Greedy, Some(rows)) => {
                let (lab, steps) = rollout_with_trace(inst, &mut GreedyPolicy::new(params))?;
                for s in steps {
                    for (node, &p) in s.probabilities.iter().enumerate() {
                        if p > 0.0 {
                            rows.push(TraceRow {
                                instance: k,
                                step: s.step,
                                chosen_node: s.node,
                                chosen_label: s.label,
                                node,
                                probability: p,
                            });
                        }
                    }
                }
                lab
            }
            (Engine::Greedy, None) => greedy_labeling(params, inst)?,
            (Engine::Mcts, _) => mcts_infer(inst, params, &cfg.mcts)?,
        };
        timing.push(TimingRecord {
            command: "infer".into(),
            phase: format!("instance {k}"),
            seconds: started.elapsed().as_secs_f64(),
        });
        let energy = total_energy(inst, &lab)?;
        let metrics = truth.as_ref().map(|t| score(&lab, t)).transpose()?;
        rows.push(InferRow {
            instance: k,
            nodes: inst.num_nodes(),
            energy,
            accuracy: metrics.map(|m| m.accuracy),
            mean_iou: metrics.map(|m| m.mean_iou),
        });
        labelings.push(LabelingRecord {
            instance: k,
            labels: lab.to_complete()?,
            energy,
        });
    }
    write_jsonl(&out.join(LABELINGS_FILE), &labelings)?;
    write_table(out, "infer", &rows)?;
    if let Some(t) = &trace {
        write_table(out, "trace", t)?;
    }
    append_timing(out, &timing)?;
    Ok(InferOutput { labelings, rows, trace })
}

/// Per-node final-round embeddings `μ⁽ᴷ⁾` of the empty state, `N × p`.
pub fn node_embeddings(params: &PolicyParams, instance: &CrfInstance) -> Result<Vec<Vec<f64>>> {
    let pass = forward(params, instance, &Labeling::empty(instance.num_nodes()))?;
    let p = pass.embed_dim();
    Ok(pass.embeddings().chunks(p).map(<[f64]>::to_vec).collect())
}

/// Writes the embeddings as `embeddings.csv` (columns `e0..`) and
/// `embeddings.json` (array of rows).
pub fn export_embeddings(params: &PolicyParams, instance: &CrfInstance, out: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = node_embeddings(params, instance)?;
    ensure_dir(out)?;
    let path = out.join("embeddings.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let p = params.shape().embed_dim;
    let mut header = vec!["node".to_string()];
    header.extend((0..p).map(|r| format!("e{r}")));
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&out.join("embeddings.json"), &rows)?;
    Ok(rows)
}
