//! Run-directory writers: delays.csv, sorted_delays.csv, predictions.jsonl,
//! records.jsonl, metrics.json, config.json.

use std::fs;
use std::path::Path;

use crate::engine::{sorted_delay_view, RunOutput, TickLog};
use crate::error::Result;
use crate::scenario::ScenarioConfig;

/// delays.csv: one row per (tick, node) with the age of that node's newest
/// delivered reply.
pub fn delays_csv_string(ticks: &[TickLog]) -> String {
    let mut out = String::from("tick,t,node,delta_t\n");
    for tick in ticks {
        for (node, delay) in tick.node_delays.iter().enumerate() {
            if let Some(d) = delay {
                out.push_str(&format!("{},{},{},{}\n", tick.tick, tick.t, node, d));
            }
        }
    }
    out
}

/// sorted_delays.csv: per tick, the managed-set record ages ascending; ticks
/// with an empty set emit an otherwise-empty row.
pub fn sorted_delays_csv_string(ticks: &[TickLog], capacity: usize) -> String {
    let mut header = String::from("tick,t");
    for i in 0..capacity {
        header.push_str(&format!(",d{i}"));
    }
    header.push('\n');
    let mut out = header;
    for (log, (tick, sorted)) in ticks.iter().zip(sorted_delay_view(ticks)) {
        out.push_str(&format!("{tick},{}", log.t));
        for i in 0..capacity {
            match sorted.get(i) {
                Some(d) => out.push_str(&format!(",{d}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn predictions_jsonl_string(ticks: &[TickLog]) -> String {
    let mut out = String::new();
    for tick in ticks {
        out.push_str(&serde_json::to_string(tick).expect("tick serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn records_jsonl_string(run: &RunOutput) -> String {
    let mut out = String::new();
    for rec in &run.deliveries {
        out.push_str(&rec.to_json_line());
        out.push('\n');
    }
    out
}

/// Write the full artifact set of one run under `dir`.
pub fn write_run_dir(dir: &Path, scenario: &ScenarioConfig, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), scenario.to_json_pretty())?;
    fs::write(dir.join("delays.csv"), delays_csv_string(&run.ticks))?;
    fs::write(
        dir.join("sorted_delays.csv"),
        sorted_delays_csv_string(&run.ticks, scenario.info_capacity),
    )?;
    fs::write(dir.join("predictions.jsonl"), predictions_jsonl_string(&run.ticks))?;
    fs::write(dir.join("records.jsonl"), records_jsonl_string(run))?;
    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&run.metrics).expect("metrics serialization cannot fail"),
    )?;
    Ok(())
}
