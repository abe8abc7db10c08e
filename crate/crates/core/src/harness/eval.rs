//! `eval`: solver and labeling comparison under the four potential
//! combinations U, U+P, U+P+HOP1 and U+P+HOP1+HOP2.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    brute_force_map, icm, loopy_bp_map, search_space, simulated_annealing, unary_argmin, NodeClassifier,
};
use crate::crf::{energy_of, CrfInstance, PotentialMask};
use crate::env::{run_episode, RewardScheme};
use crate::error::{Error, Result};
use crate::instances::{instance_seed, score_labels, Dataset};
use crate::mcts::mcts_infer;
use crate::policy::{GreedyPolicy, PolicyParams};
use crate::training::greedy_labeling;

use super::commands::LabelingRecord;
use super::config::{RunConfig, Solver, Split};
use super::tables::{append_timing, ensure_dir, write_table, TimingRecord};

/// The evaluation columns, from unaries only up to the full energy.
pub const POTENTIAL_COLUMNS: [(&str, PotentialMask); 4] = [
    (
        "U",
        PotentialMask {
            pairwise: false,
            hop1: false,
            hop2: false,
        },
    ),
    (
        "U+P",
        PotentialMask {
            pairwise: true,
            hop1: false,
            hop2: false,
        },
    ),
    (
        "U+P+HOP1",
        PotentialMask {
            pairwise: true,
            hop1: true,
            hop2: false,
        },
    ),
    ("U+P+HOP1+HOP2", PotentialMask::ALL),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub source: String,
    pub potentials: String,
    pub instances: usize,
    pub accuracy: Option<f64>,
    pub mean_iou: Option<f64>,
    pub mean_energy: Option<f64>,
    /// Mean brute-force energy over the same instances, when every instance
    /// is small enough.
    pub brute_energy: Option<f64>,
    /// `(mean_energy − brute_energy) / |brute_energy|`.
    pub gap: Option<f64>,
    pub note: Option<String>,
}

/// Scheme-1 rewards of greedy policy steps, split by whether the step's
/// label matches the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub low: f64,
    pub high: f64,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub histogram: Option<Vec<HistogramRow>>,
}

impl EvalReport {
    pub fn row(&self, source: &str, potentials: &str) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.source == source && r.potentials == potentials)
    }
}

pub fn split_indices(dataset: &Dataset, split: Split) -> Vec<usize> {
    match split {
        Split::Validation if !dataset.validation.is_empty() => dataset.validation.clone(),
        Split::Validation | Split::All => (0..dataset.len()).collect(),
        Split::Train => dataset.train.clone(),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den.abs()
    }
}

/// Equal-width histogram over the observed range.
pub fn reward_histogram(samples: &[(f64, bool)], bins: usize) -> Vec<HistogramRow> {
    if samples.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let bins = if hi > lo { bins } else { 1 };
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut rows: Vec<HistogramRow> = (0..bins)
        .map(|b| HistogramRow {
            low: lo + b as f64 * width,
            high: if b + 1 == bins { hi.max(lo + width) } else { lo + (b + 1) as f64 * width },
            correct: 0,
            incorrect: 0,
        })
        .collect();
    for &(r, ok) in samples {
        let b = (((r - lo) / width) as usize).min(bins - 1);
        if ok {
            rows[b].correct += 1;
        } else {
            rows[b].incorrect += 1;
        }
    }
    rows
}

struct Source {
    name: String,
    kind: SourceKind,
}

enum SourceKind {
    Solver(Solver),
    /// Position in the supplied labeling sets.
    Fixed(usize),
}

/// Runs every configured solver and scores every supplied labeling set on
/// the chosen split, once per potential column. Writes `eval.{csv,json}`
/// and, when enabled, `reward_histogram.{csv,json}`.
pub fn eval(
    dataset: &Dataset,
    config: &RunConfig,
    params: Option<&PolicyParams>,
    labelings: &[(String, Vec<LabelingRecord>)],
    out: &Path,
) -> Result<EvalReport> {
    let cfg = config.resolved();
    let ecfg = &cfg.eval;
    if let Some(s) = ecfg.solvers.iter().find(|s| s.needs_params()) {
        if params.is_none() {
            return Err(Error::InvalidConfig(format!("solver `{s}` needs policy parameters")));
        }
    }
    if ecfg.reward_histogram && params.is_none() {
        return Err(Error::InvalidConfig("the reward histogram needs policy parameters".into()));
    }
    if let Some(p) = params {
        for (inst, _) in &dataset.items {
            p.check_compatible(inst)?;
        }
    }
    let indices = split_indices(dataset, ecfg.split);
    let by_index: Vec<(String, BTreeMap<usize, &LabelingRecord>)> = labelings
        .iter()
        .map(|(name, recs)| (name.clone(), recs.iter().map(|r| (r.instance, r)).collect()))
        .collect();
    for (name, map) in &by_index {
        for &k in &indices {
            let rec = map
                .get(&k)
                .ok_or_else(|| Error::Format(format!("labelings `{name}` have no entry for instance {k}")))?;
            let n = dataset.items[k].0.num_nodes();
            if rec.labels.len() != n || rec.labels.iter().any(|&l| l >= dataset.items[k].0.num_labels()) {
                return Err(Error::Shape(format!(
                    "labelings `{name}` do not fit instance {k} ({n} nodes)"
                )));
            }
        }
    }
    let classifier = if ecfg.solvers.contains(&Solver::Supervised) {
        Some(NodeClassifier::fit(dataset, &ecfg.supervised)?)
    } else {
        None
    };

    let mut sources: Vec<Source> = ecfg
        .solvers
        .iter()
        .map(|&s| Source {
            name: s.name().to_string(),
            kind: SourceKind::Solver(s),
        })
        .collect();
    sources.extend(labelings.iter().enumerate().map(|(pos, (name, _))| Source {
        name: name.clone(),
        kind: SourceKind::Fixed(pos),
    }));

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for (col, mask) in POTENTIAL_COLUMNS {
        let masked: Vec<(usize, CrfInstance)> = indices
            .iter()
            .map(|&k| (k, dataset.items[k].0.masked(mask)))
            .collect();
        let brute_ok = masked
            .iter()
            .all(|(_, inst)| search_space(inst) <= ecfg.brute_force_cap as u128);
        let brute: Option<Vec<Vec<usize>>> = if brute_ok {
            let started = Instant::now();
            let r = masked
                .iter()
                .map(|(_, inst)| brute_force_map(inst, ecfg.brute_force_cap as u128).map(|r| r.labels))
                .collect::<Result<Vec<_>>>()?;
            timing.push(TimingRecord {
                command: "eval".into(),
                phase: format!("brute {col}"),
                seconds: started.elapsed().as_secs_f64(),
            });
            Some(r)
        } else {
            None
        };
        let brute_energy = brute.as_ref().map(|b| {
            masked.iter().zip(b).map(|((_, inst), l)| energy_of(inst, l)).sum::<f64>() / masked.len().max(1) as f64
        });

        for source in &sources {
            let started = Instant::now();
            let solved: Result<Vec<Vec<usize>>> = masked
                .iter()
                .enumerate()
                .map(|(pos, (k, inst))| match &source.kind {
                    SourceKind::Fixed(set) => Ok(by_index[*set].1[k].labels.clone()),
                    SourceKind::Solver(s) => run_solver(*s, inst, *k, pos, &cfg, params, classifier.as_ref(), &brute),
                })
                .collect();
            timing.push(TimingRecord {
                command: "eval".into(),
                phase: format!("{} {col}", source.name),
                seconds: started.elapsed().as_secs_f64(),
            });
            let row = match solved {
                Ok(all) => {
                    let n = all.len().max(1) as f64;
                    let mut acc = 0.0;
                    let mut iou = 0.0;
                    let mut energy = 0.0;
                    for ((k, inst), labels) in masked.iter().zip(&all) {
                        let truth = dataset.items[*k].1.to_complete()?;
                        let m = score_labels(labels, &truth)?;
                        acc += m.accuracy;
                        iou += m.mean_iou;
                        energy += energy_of(inst, labels);
                    }
                    let mean_energy = energy / n;
                    EvalRow {
                        source: source.name.clone(),
                        potentials: col.to_string(),
                        instances: all.len(),
                        accuracy: Some(acc / n),
                        mean_iou: Some(iou / n),
                        mean_energy: Some(mean_energy),
                        brute_energy,
                        gap: brute_energy.map(|b| ratio(mean_energy - b, b)),
                        note: None,
                    }
                }
                Err(Error::Unsupported(msg)) => EvalRow {
                    source: source.name.clone(),
                    potentials: col.to_string(),
                    instances: 0,
                    accuracy: None,
                    mean_iou: None,
                    mean_energy: None,
                    brute_energy,
                    gap: None,
                    note: Some(format!("unsupported: {msg}")),
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }

    ensure_dir(out)?;
    write_table(out, "eval", &rows)?;
    let histogram = match (ecfg.reward_histogram, params) {
        (true, Some(p)) => {
            let mut samples = Vec::new();
            for &k in &indices {
                let (inst, truth) = &dataset.items[k];
                let ep = run_episode(inst, &mut GreedyPolicy::new(p), RewardScheme::EnergyDelta)?;
                for (a, &r) in ep.actions.iter().zip(&ep.rewards) {
                    samples.push((r, truth.get(a.node) == Some(a.label)));
                }
            }
            let h = reward_histogram(&samples, ecfg.histogram_bins);
            write_table(out, "reward_histogram", &h)?;
            Some(h)
        }
        _ => None,
    };
    append_timing(out, &timing)?;
    Ok(EvalReport { rows, histogram })
}

#[allow(clippy::too_many_arguments)]
fn run_solver(
    solver: Solver,
    inst: &CrfInstance,
    index: usize,
    pos: usize,
    cfg: &RunConfig,
    params: Option<&PolicyParams>,
    classifier: Option<&NodeClassifier>,
    brute: &Option<Vec<Vec<usize>>>,
) -> Result<Vec<usize>> {
    let e = &cfg.eval;
    match solver {
        Solver::Unary => Ok(unary_argmin(inst).labels),
        Solver::Brute => match brute {
            Some(b) => Ok(b[pos].clone()),
            None => Err(Error::Unsupported(format!(
                "an instance exceeds the brute-force cap of {} labelings",
                e.brute_force_cap
            ))),
        },
        Solver::Icm => Ok(icm(inst, &inst.unary_argmin())?.labels),
        Solver::Bp => Ok(loopy_bp_map(inst, &e.bp)?.labels),
        Solver::Anneal => Ok(simulated_annealing(
            inst,
            &inst.unary_argmin(),
            &e.anneal,
            instance_seed(cfg.base_seed(), index),
        )?
        .labels),
        Solver::Supervised => classifier.expect("fitted when requested").predict_labels(inst),
        Solver::Greedy => greedy_labeling(params.expect("checked"), inst)?.to_complete(),
        Solver::Mcts => mcts_infer(inst, params.expect("checked"), &cfg.mcts)?.to_complete(),
    }
}
