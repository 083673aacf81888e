//! Control-run writers: tracking.csv and montecarlo_summary.json.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::montecarlo::MonteCarloSummary;
use crate::tracking::TrackingRun;

/// tracking.csv: t, error components, ‖e‖, |f − f̂|, ω(t), bound(t).
pub fn tracking_csv_string(run: &TrackingRun) -> String {
    let n = run.errors.first().map_or(0, |e| e.len());
    let mut out = String::from("t");
    for i in 0..n {
        out.push_str(&format!(",e{i}"));
    }
    out.push_str(",e_norm,pred_error,omega,bound\n");
    for i in 0..run.times.len() {
        out.push_str(&format!("{}", run.times[i]));
        for v in &run.errors[i] {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            run.error_norms[i], run.pred_errors[i], run.omegas[i], run.bounds[i]
        ));
    }
    out
}

pub fn write_tracking_run(dir: &Path, run: &TrackingRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("tracking.csv"), tracking_csv_string(run))?;
    Ok(())
}

pub fn write_monte_carlo(dir: &Path, summary: &MonteCarloSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("montecarlo_summary.json"),
        serde_json::to_string_pretty(summary).expect("summary serialization cannot fail"),
    )?;
    Ok(())
}
