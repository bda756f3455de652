//! Benchmark harness: runs each (algorithm, seed) pair from the same
//! per-seed random initialization and records one convergence trace per run
//! plus a summary table.

use std::path::{Path, PathBuf};

use cnmf_core::{
    fit_with_init, init_random, Algorithm, DataMatrix, FitResult, SolverConfig, StopReason,
};

use crate::error::Result;
use crate::format::{atomic_write, write_trace};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub l: usize,
    pub max_iters: usize,
    pub time_limit_s: f64,
    pub rel_tol: f64,
    pub no_timing: bool,
}

#[derive(Debug)]
pub struct BenchRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: std::result::Result<FitResult, String>,
    pub trace_path: Option<PathBuf>,
}

impl BenchRun {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".into(),
            Err(e) => format!("error: {e}"),
        }
    }
}

/// Runs the full (algorithm, seed) grid. Per-run failures are recorded, not
/// propagated; trace and summary files are written when `out_dir` is given.
pub fn run_bench(
    x: &DataMatrix,
    cfg: &BenchConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<BenchRun>> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        // one initialization per seed, shared by every algorithm
        let init = init_random(x.num_features(), x.num_timebins(), cfg.k, cfg.l, seed, x)?;
        for &algorithm in &cfg.algorithms {
            let solver_cfg = SolverConfig {
                algorithm,
                max_iters: cfg.max_iters,
                time_limit_s: cfg.time_limit_s,
                rel_tol: cfg.rel_tol,
                seed,
                ..Default::default()
            };
            let outcome = fit_with_init(x, init.clone(), &solver_cfg).map_err(|e| e.to_string());
            let trace_path = match (&outcome, out_dir) {
                (Ok(result), Some(dir)) => {
                    let path = dir.join(format!("trace_{}_{seed}.csv", algorithm.name()));
                    write_trace(&path, &result.trace, cfg.no_timing)?;
                    Some(path)
                }
                _ => None,
            };
            runs.push(BenchRun { algorithm, seed, outcome, trace_path });
        }
    }
    if let Some(dir) = out_dir {
        write_summary(&dir.join("summary.csv"), &runs)?;
    }
    Ok(runs)
}

fn write_summary(path: &Path, runs: &[BenchRun]) -> Result<()> {
    let mut out = String::from("algorithm,seed,final_loss,iters,elapsed_s,status\n");
    for run in runs {
        match &run.outcome {
            Ok(result) => {
                let last = result.trace.records.last();
                out.push_str(&format!(
                    "{},{},{:.16e},{},{:.9},{}\n",
                    run.algorithm.name(),
                    run.seed,
                    last.map_or(f64::NAN, |r| r.loss),
                    last.map_or(0, |r| r.iteration),
                    last.map_or(f64::NAN, |r| r.elapsed_s),
                    run.status()
                ));
            }
            Err(_) => {
                out.push_str(&format!(
                    "{},{},,,,{}\n",
                    run.algorithm.name(),
                    run.seed,
                    run.status()
                ));
            }
        }
    }
    atomic_write(path, out.as_bytes())
}

/// First wall-clock time at which a run's trace reaches `target` loss.
pub fn time_to_reach(result: &FitResult, target: f64) -> Option<f64> {
    result
        .trace
        .records
        .iter()
        .find(|r| r.loss <= target)
        .map(|r| r.elapsed_s)
}

/// Stop-reason plus loss line used by the fit subcommand; fixed key order.
pub fn summary_line(result: &FitResult) -> String {
    format!(
        "{{\"final_loss\": {:.16e}, \"stop_reason\": \"{}\"}}",
        result.trace.final_loss().unwrap_or(f64::NAN),
        result.stop_reason.name()
    )
}

pub fn stop_reason_label(reason: StopReason) -> &'static str {
    reason.name()
}
