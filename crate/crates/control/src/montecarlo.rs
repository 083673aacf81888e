//! Monte-Carlo repetitions of the control task.
//!
//! The experts are pretrained once on the shared sample set; each repetition
//! clones the pool, draws its own initial state and reference parameters
//! from the configured ranges under a per-run seed, and simulates the full
//! horizon. Repetitions are independent and run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::feed::ExpertPool;
use crate::system::{ultimate_bound, ErrorSystem};
use crate::tracking::{simulate_tracking, Feed, SineReference, TrackingConfig, TrackingRun};

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub step_s: f64,
    pub broadcast_interval_s: f64,
    pub amplitude_range: (f64, f64),
    pub period_range: (f64, f64),
    /// Initial-state box applied to every component.
    pub initial_box: (f64, f64),
    pub bound_tolerance: f64,
}

/// Per-run statistics in the shape the violin summaries plot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub period: f64,
    pub x0: Vec<f64>,
    pub mean_tracking_error: f64,
    pub max_tracking_error: f64,
    pub mean_prediction_error: f64,
    pub max_prediction_error: f64,
    pub omega_bar: f64,
    pub ultimate_bound: f64,
    pub final_quarter_sup: f64,
    pub premise_ok: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_of_mean_tracking: f64,
    pub var_of_mean_tracking: f64,
    pub mean_of_max_tracking: f64,
    pub var_of_max_tracking: f64,
    pub mean_of_mean_prediction: f64,
    pub var_of_mean_prediction: f64,
    pub mean_of_max_prediction: f64,
    pub var_of_max_prediction: f64,
    pub all_premises_ok: bool,
    pub all_bounds_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn summarize(run: usize, seed: u64, amplitude: f64, period: f64, x0: Vec<f64>, sys: &ErrorSystem, tr: &TrackingRun) -> RunSummary {
    let n = tr.error_norms.len() as f64;
    RunSummary {
        run,
        seed,
        amplitude,
        period,
        x0,
        mean_tracking_error: tr.error_norms.iter().sum::<f64>() / n,
        max_tracking_error: tr.error_norms.iter().copied().fold(0.0, f64::max),
        mean_prediction_error: tr.pred_errors.iter().sum::<f64>() / n,
        max_prediction_error: tr.pred_errors.iter().copied().fold(0.0, f64::max),
        omega_bar: tr.omega_bar,
        ultimate_bound: ultimate_bound(sys, tr.omega_bar),
        final_quarter_sup: tr.final_quarter_sup(),
        premise_ok: tr.premise_ok,
        bound_ok: tr.bound_ok,
    }
}

/// Run the repetitions in parallel and collect the violin-plot statistics.
pub fn run_monte_carlo(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    sys: &ErrorSystem,
    pool: &ExpertPool,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloSummary> {
    let n = sys.gains.len();
    let results: Vec<Result<RunSummary>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.seed.wrapping_add(run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amplitude = rng.random_range(cfg.amplitude_range.0..=cfg.amplitude_range.1);
            let period = rng.random_range(cfg.period_range.0..=cfg.period_range.1);
            let x0: Vec<f64> =
                (0..n).map(|_| rng.random_range(cfg.initial_box.0..=cfg.initial_box.1)).collect();
            let tracking_cfg = TrackingConfig {
                duration_s: cfg.duration_s,
                step_s: cfg.step_s,
                broadcast_interval_s: cfg.broadcast_interval_s,
                reference: SineReference { amplitude, period },
                x0: x0.clone(),
                bound_tolerance: cfg.bound_tolerance,
            };
            let mut feed = Feed::Live(pool.clone());
            let tr = simulate_tracking(f, sys, &tracking_cfg, &mut feed)?;
            Ok(summarize(run, seed, amplitude, period, x0, sys, &tr))
        })
        .collect();

    let mut runs = Vec::with_capacity(cfg.runs);
    for r in results {
        runs.push(r?);
    }

    let (m_mt, v_mt) = mean_var(runs.iter().map(|r| r.mean_tracking_error));
    let (m_xt, v_xt) = mean_var(runs.iter().map(|r| r.max_tracking_error));
    let (m_mp, v_mp) = mean_var(runs.iter().map(|r| r.mean_prediction_error));
    let (m_xp, v_xp) = mean_var(runs.iter().map(|r| r.max_prediction_error));
    let aggregate = Aggregate {
        mean_of_mean_tracking: m_mt,
        var_of_mean_tracking: v_mt,
        mean_of_max_tracking: m_xt,
        var_of_max_tracking: v_xt,
        mean_of_mean_prediction: m_mp,
        var_of_mean_prediction: v_mp,
        mean_of_max_prediction: m_xp,
        var_of_max_prediction: v_xp,
        all_premises_ok: runs.iter().all(|r| r.premise_ok),
        all_bounds_ok: runs.iter().all(|r| r.bound_ok),
    };
    Ok(MonteCarloSummary { runs, aggregate })
}
