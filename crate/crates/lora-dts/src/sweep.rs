//! Parallel evaluation of scenario grids.
//!
//! Cells are split into fixed-size trial chunks and the chunks are spread
//! over a rayon pool. Chunk results are integer counts summed per cell, so
//! the outcome does not depend on the worker count or scheduling.

use std::time::Instant;

use lora_dts_core::sim::{SerPoint, Simulator, TrialOutcome};
use lora_dts_core::{CompensationPlan, EstimateReport, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Trials per scheduling unit.
pub const TRIALS_PER_TASK: u64 = 16;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub scenario: ScenarioConfig,
    /// Per-cell failures are kept here so the rest of the sweep still runs.
    pub result: Result<SerPoint, String>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, SweepError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

/// Runs every cell with `workers` threads (0 picks the core count).
pub fn run_sweep(cells: &[ScenarioConfig], workers: usize) -> Result<Vec<CellResult>, SweepError> {
    let pool = pool(workers)?;
    Ok(pool.install(|| sweep_in_pool(cells)))
}

fn sweep_in_pool(cells: &[ScenarioConfig]) -> Vec<CellResult> {
    let sims: Vec<Result<Simulator, String>> = cells
        .par_iter()
        .map(|sc| Simulator::new(*sc).map_err(|e| e.to_string()))
        .collect();

    let tasks: Vec<(usize, u64, u64)> = sims
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_ok())
        .flat_map(|(i, _)| {
            let trials = cells[i].trials;
            (0..trials.div_ceil(TRIALS_PER_TASK)).map(move |k| {
                let lo = k * TRIALS_PER_TASK;
                (i, lo, (lo + TRIALS_PER_TASK).min(trials))
            })
        })
        .collect();

    let done: Vec<(usize, Result<TrialOutcome, String>, f64)> = tasks
        .par_iter()
        .map(|&(i, lo, hi)| {
            let sim = sims[i].as_ref().expect("only runnable cells are scheduled");
            let start = Instant::now();
            let out = sim.run_range(lo..hi).map_err(|e| e.to_string());
            (i, out, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut acc: Vec<Result<(TrialOutcome, f64), String>> = sims
        .iter()
        .map(|s| match s {
            Ok(_) => Ok((TrialOutcome::default(), 0.0)),
            Err(e) => Err(e.clone()),
        })
        .collect();
    for (i, out, secs) in done {
        acc[i] = match (std::mem::replace(&mut acc[i], Ok(Default::default())), out) {
            (Ok((sum, t)), Ok(o)) => Ok((sum + o, t + secs)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
    }

    cells
        .iter()
        .zip(acc)
        .map(|(sc, r)| CellResult {
            scenario: *sc,
            result: r.map(|(o, secs)| SerPoint {
                wall_time_s: secs,
                ..SerPoint::from_counts(o.errors, o.total)
            }),
        })
        .collect()
}

/// Estimator diagnostics of one trial, written by `--dump-estimates`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateDump {
    pub cell: usize,
    pub trial: u64,
    pub errors: u64,
    pub sent: Vec<u32>,
    pub decided: Vec<u32>,
    pub report: EstimateReport,
    pub plan: CompensationPlan,
}

/// Re-runs the first `trials` trials of every cell with full diagnostics.
pub fn dump_estimates(cells: &[ScenarioConfig], trials: u64, workers: usize) -> Result<Vec<EstimateDump>, SweepError> {
    let pool = pool(workers)?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .filter_map(|(i, sc)| Simulator::new(*sc).ok().map(|sim| (i, sim)))
            .flat_map_iter(|(i, sim)| {
                (0..trials.min(sim.scenario().trials)).filter_map(move |t| {
                    sim.run_trial_detailed(t).ok().map(|d| EstimateDump {
                        cell: i,
                        trial: t,
                        errors: d.outcome.errors,
                        sent: d.sent,
                        decided: d.decided,
                        report: d.report,
                        plan: d.plan,
                    })
                })
            })
            .collect()
    }))
}
