//! `bench`: inference wall-clock against graph size.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::crf::CrfInstance;
use crate::error::{Error, Result};
use crate::instances::{generate, InstanceSpec};
use crate::mcts::{mcts_infer, MctsConfig};
use crate::policy::{PolicyParams, PolicyShape};
use crate::training::greedy_labeling;

use super::config::RunConfig;
use super::tables::{ensure_dir, write_json, write_table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub nodes: usize,
    pub width: usize,
    pub height: usize,
    pub greedy_seconds: f64,
    pub mcts_seconds: f64,
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Fit of greedy seconds against node count.
    pub greedy_fit: LineFit,
}

/// Most square `width × height` grid with exactly `n` cells (`width ≥ height`).
pub fn grid_for(n: usize) -> (usize, usize) {
    let mut h = (n as f64).sqrt() as usize;
    while h > 1 && !n.is_multiple_of(h) {
        h -= 1;
    }
    let h = h.max(1);
    (n / h, h)
}

/// Ordinary least squares; `r2` is 1 when the points are all equal in `y`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LineFit { slope, intercept, r2 }
}

fn time_once(f: impl FnOnce() -> Result<()>) -> Result<f64> {
    let started = Instant::now();
    f()?;
    Ok(started.elapsed().as_secs_f64())
}

pub fn bench_instance(nodes: usize, num_labels: usize, seed: u64) -> Result<CrfInstance> {
    let (width, height) = grid_for(nodes);
    let spec = InstanceSpec {
        width,
        height,
        num_labels,
        objects: (nodes / 50).max(2),
        hop1_cliques: (nodes / 100).max(2),
        seed,
        ..InstanceSpec::default()
    };
    Ok(generate(&spec)?.0)
}

/// Times greedy and budgeted search inference at every configured size,
/// writes `bench.{csv,json}` and `bench_fit.json`. Without `params` a
/// seeded random network is used.
pub fn bench(params: Option<&PolicyParams>, config: &RunConfig, out: &Path) -> Result<BenchReport> {
    let b = &config.bench;
    if b.sizes.len() < 2 || b.repeats == 0 {
        return Err(Error::InvalidConfig("bench needs at least two sizes and one repeat".into()));
    }
    let mcts = MctsConfig {
        infer_n_sim: b.mcts_n_sim,
        infer_d_sim: b.mcts_d_sim,
        seed: config.base_seed(),
        ..config.resolved().mcts
    };
    let mut cases = Vec::with_capacity(b.sizes.len());
    for &n in &b.sizes {
        let inst = bench_instance(n, b.num_labels, config.base_seed())?;
        let p = match params {
            Some(p) => p.clone(),
            None => PolicyParams::init(PolicyShape::for_instance(&inst, b.rounds, b.embed_dim), config.base_seed()),
        };
        p.check_compatible(&inst)?;
        cases.push((inst, p));
    }
    // Repeats are interleaved across sizes so that a slow stretch of the
    // machine lands on every size rather than on one.
    let mut greedy = vec![f64::INFINITY; cases.len()];
    let mut search = vec![f64::INFINITY; cases.len()];
    for _ in 0..b.repeats {
        for (best, (inst, p)) in greedy.iter_mut().zip(&cases) {
            *best = best.min(time_once(|| greedy_labeling(p, inst).map(|_| ()))?);
        }
    }
    for _ in 0..b.repeats {
        for (best, (inst, p)) in search.iter_mut().zip(&cases) {
            *best = best.min(time_once(|| mcts_infer(inst, p, &mcts).map(|_| ()))?);
        }
    }
    let rows: Vec<BenchRow> = b
        .sizes
        .iter()
        .zip(greedy.into_iter().zip(search))
        .map(|(&n, (greedy_seconds, mcts_seconds))| {
            let (width, height) = grid_for(n);
            BenchRow {
                nodes: n,
                width,
                height,
                greedy_seconds,
                mcts_seconds,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.greedy_seconds).collect();
    let report = BenchReport {
        greedy_fit: fit_line(&xs, &ys),
        rows,
    };
    ensure_dir(out)?;
    write_table(out, "bench", &report.rows)?;
    write_json(&out.join("bench_fit.json"), &report.greedy_fit)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_exact_and_squarish() {
        for (n, wh) in [(50, (10, 5)), (250, (25, 10)), (500, (25, 20)), (1000, (40, 25)), (2000, (50, 40)), (7, (7, 1))] {
            assert_eq!(grid_for(n), wh);
        }
    }

    #[test]
    fn exact_line_fits_perfectly() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let noisy = fit_line(&xs, &[1.0, 0.0, 1.0, 0.0]);
        assert!(noisy.r2 < 0.5);
    }

    #[test]
    fn small_sweep_runs() {
        let mut cfg = RunConfig::default();
        cfg.bench.sizes = vec![12, 24];
        cfg.bench.repeats = 1;
        let dir = tempfile::tempdir().unwrap();
        let report = bench(None, &cfg, dir.path()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(dir.path().join("bench.csv").exists() && dir.path().join("bench_fit.json").exists());
    }
}
