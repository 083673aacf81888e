//! Library backing the `asyncgp` binary: experiment runners, the aggregator
//! comparison report, and kernel Lipschitz reporting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use asyncgp_control::{
    build_error_system, output as control_output, run_monte_carlo, simulate_tracking, ExpertPool,
    Feed, MonteCarloConfig, SineReference, TrackingConfig,
};
use asyncgp_core::{
    default_d_max, lipschitz_closed_form, lipschitz_oracle, rq_table_lipschitz, AggregatorKind,
    KernelFamily, KernelSpec,
};
use asyncgp_simnet::{
    output as sim_output, run_simulation, ControlSection, Metrics, Mode, ScenarioConfig,
    StreamSource,
};

/// Where run directories land: `--out`, else $ASYNCGP_OUT, else ./runs.
pub fn resolve_out_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("ASYNCGP_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("runs")
}

#[derive(Debug, Clone)]
pub enum ScenarioChoice {
    Preset { name: String },
    File { path: PathBuf },
}

/// Options of `asyncgp run`.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scenario: ScenarioChoice,
    /// One aggregator, or None for all six on the same event stream.
    pub aggregator: Option<AggregatorKind>,
    pub info_capacity: Option<usize>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub mode: Option<Mode>,
    pub out_root: PathBuf,
}

fn base_scenario(opts: &RunOptions) -> Result<ScenarioConfig> {
    let seed = opts.seed.unwrap_or(7);
    let ibar = opts.info_capacity.unwrap_or(4);
    let mut scenario = match &opts.scenario {
        ScenarioChoice::Preset { name } => match name.as_str() {
            "table2" => ScenarioConfig::table2(seed, ibar, AggregatorKind::AsyncDgp),
            "table2-stalled" => {
                ScenarioConfig::table2_stalled(seed, ibar, AggregatorKind::AsyncDgp)
            }
            "control" => ScenarioConfig::control_task(seed),
            other => {
                bail!("unknown preset `{other}` (expected table2, table2-stalled, or control)")
            }
        },
        ScenarioChoice::File { path } => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))?;
            let mut sc = ScenarioConfig::from_json_str(&text)?;
            if let Some(s) = opts.seed {
                sc.seed = s;
            }
            if let Some(i) = opts.info_capacity {
                sc.info_capacity = i;
            }
            sc
        }
    };
    if let Some(d) = opts.duration_s {
        scenario.duration_s = d;
    }
    if let Some(m) = opts.mode {
        scenario.mode = m;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Execute `asyncgp run`; returns the created run directories.
pub fn run_experiment(opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let scenario = base_scenario(opts)?;
    let aggregators: Vec<AggregatorKind> = match opts.aggregator {
        Some(kind) => vec![kind],
        None => AggregatorKind::ALL.to_vec(),
    };

    let mut dirs = Vec::new();
    for kind in aggregators {
        let mut sc = scenario.clone();
        sc.aggregator = kind;
        let dir = opts
            .out_root
            .join(format!("{}-seed{}-ibar{}", kind.name(), sc.seed, sc.info_capacity));
        match sc.mode {
            Mode::Regression => {
                let run = run_simulation(&sc)?;
                sim_output::write_run_dir(&dir, &sc, &run)?;
            }
            Mode::Control => {
                if kind != AggregatorKind::AsyncDgp {
                    bail!("control mode exercises the bounded aggregator only (asyncdgp)");
                }
                run_control_experiment(&sc, &dir)?;
            }
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Control-task runner: one logged tracking run plus the Monte-Carlo sweep.
fn run_control_experiment(scenario: &ScenarioConfig, dir: &Path) -> Result<()> {
    let StreamSource::Synthetic(stream) = &scenario.stream else {
        bail!("control mode needs a synthetic stream (the plant drift must be known)");
    };
    let expansion = asyncgp_simnet::KernelExpansion::random(
        &stream.kernel,
        &stream.domain,
        stream.n_centers,
        stream.norm_target,
        stream.seed,
    )?;

    let control = scenario.control.clone().unwrap_or(ControlSection {
        gains: vec![2.0, 3.0],
        step_s: 0.002,
        amplitude_range: (0.4, 0.6),
        period_range: (3.0, 5.0),
        initial_box: (0.0, 1.0),
        runs: 100,
    });
    let sys = build_error_system(&control.gains)?;
    if control.gains.len() != stream.kernel.dim() {
        bail!(
            "system order {} must match the kernel dimension {}",
            control.gains.len(),
            stream.kernel.dim()
        );
    }

    // Pretraining: noiseless samples of the plant drift, uniform over the
    // domain, shared round-robin across experts.
    let pretrain = pretrain_samples(scenario, &expansion)?;
    let pool = ExpertPool::new(
        &scenario.nodes,
        scenario.info_capacity,
        scenario.responsibility,
        &pretrain,
    )?;

    let eval = |x: &[f64]| expansion.eval(x);

    // One fully logged nominal run at mid-range reference parameters.
    let nominal = TrackingConfig {
        duration_s: scenario.duration_s,
        step_s: control.step_s,
        broadcast_interval_s: scenario.broadcast_interval_s,
        reference: SineReference {
            amplitude: 0.5 * (control.amplitude_range.0 + control.amplitude_range.1),
            period: 0.5 * (control.period_range.0 + control.period_range.1),
        },
        x0: vec![0.5; control.gains.len()],
        bound_tolerance: 0.01,
    };
    let mut feed = Feed::Live(pool.clone());
    let run = simulate_tracking(&eval, &sys, &nominal, &mut feed)?;
    fs::create_dir_all(dir)?;
    control_output::write_tracking_run(dir, &run)?;

    let mc_cfg = MonteCarloConfig {
        runs: control.runs,
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        step_s: control.step_s,
        broadcast_interval_s: scenario.broadcast_interval_s,
        amplitude_range: control.amplitude_range,
        period_range: control.period_range,
        initial_box: control.initial_box,
        bound_tolerance: 0.01,
    };
    let summary = run_monte_carlo(&eval, &sys, &pool, &mc_cfg)?;
    control_output::write_monte_carlo(dir, &summary)?;
    fs::write(dir.join("config.json"), scenario.to_json_pretty())?;
    Ok(())
}

/// Noiseless drift samples for the control experts, uniform over the stream
/// domain: with targets exactly on f and beta >= gamma, the experts satisfy
/// |f − μ| ≤ βσ deterministically.
fn pretrain_samples(
    scenario: &ScenarioConfig,
    expansion: &asyncgp_simnet::KernelExpansion,
) -> Result<Vec<(Vec<f64>, f64)>> {
    use rand::{Rng, SeedableRng};
    let StreamSource::Synthetic(stream) = &scenario.stream else {
        bail!("control pretraining needs a synthetic stream");
    };
    let n = scenario.pretrain.as_ref().map(|p| p.n_points).unwrap_or(1000);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scenario.seed ^ 0xC0FFEE);
    Ok((0..n)
        .map(|_| {
            let x: Vec<f64> =
                stream.domain.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let y = expansion.eval(&x);
            (x, y)
        })
        .collect())
}

/// One row of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub run_dir: String,
    pub aggregator: String,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub mean_omega: Option<f64>,
    pub max_omega: Option<f64>,
    pub bound_violations: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub stream_hash: String,
    pub rows: Vec<CompareRow>,
}

/// Build the aggregator comparison over run directories sharing one stream.
pub fn compare_report(run_dirs: &[PathBuf]) -> Result<CompareReport> {
    if run_dirs.is_empty() {
        bail!("compare needs at least one run directory");
    }
    let mut rows = Vec::new();
    let mut hash: Option<String> = None;
    for dir in run_dirs {
        let path = dir.join("metrics.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let metrics: Metrics = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        match &hash {
            None => hash = Some(metrics.stream_hash.clone()),
            Some(h) if *h != metrics.stream_hash => {
                return Err(anyhow!(
                    "stream hash mismatch: {} carries {} but earlier runs carry {h}; \
                     comparison refused (different event streams)",
                    dir.display(),
                    metrics.stream_hash,
                ));
            }
            Some(_) => {}
        }
        rows.push(CompareRow {
            run_dir: dir.display().to_string(),
            aggregator: metrics.aggregator,
            mse: metrics.mse,
            mae: metrics.mae,
            mean_omega: metrics.mean_omega,
            max_omega: metrics.max_omega,
            bound_violations: metrics.bound_violations,
        });
    }
    Ok(CompareReport { stream_hash: hash.unwrap_or_default(), rows })
}

pub fn format_compare_table(report: &CompareReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("stream {}\n", &report.stream_hash[..16.min(report.stream_hash.len())]));
    out.push_str(&format!(
        "{:<10} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
        "aggregator", "mse", "mae", "mean_omega", "max_omega", "violations"
    ));
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        let fvi = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
        out.push_str(&format!(
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
            row.aggregator,
            fmt(row.mse),
            fmt(row.mae),
            fmt(row.mean_omega),
            fmt(row.max_omega),
            fvi(row.bound_violations)
        ));
    }
    out
}

/// Machine-readable kernel Lipschitz report (`asyncgp kernels lipschitz`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelReport {
    pub family: String,
    pub closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agrees: Option<bool>,
    /// RQ only: the reference-table constant and whether it matches the
    /// oracle (it understates the true maximum).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq_table_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq_table_agrees: Option<bool>,
}

pub fn kernel_report(
    spec: &KernelSpec,
    with_oracle: bool,
    d_max: Option<f64>,
    grid_points: usize,
) -> Result<KernelReport> {
    let closed = lipschitz_closed_form(spec);
    let mut report = KernelReport {
        family: spec.family().name().to_string(),
        closed_form: closed,
        oracle: None,
        critical_distance: None,
        agrees: None,
        rq_table_value: None,
        rq_table_agrees: None,
    };
    if spec.family() == KernelFamily::Rq {
        report.rq_table_value = Some(rq_table_lipschitz(spec));
    }
    if with_oracle {
        let d_max = d_max.unwrap_or_else(|| default_d_max(spec));
        let oracle = lipschitz_oracle(spec, d_max, grid_points)?;
        report.oracle = Some(oracle.oracle_value);
        report.critical_distance = Some(oracle.critical_distance);
        report.agrees = Some(oracle.agrees);
        if let Some(table) = report.rq_table_value {
            report.rq_table_agrees =
                Some((table - oracle.oracle_value).abs() <= 1e-6 * oracle.oracle_value);
        }
    }
    Ok(report)
}

pub fn format_kernel_line(spec: &KernelSpec, report: &KernelReport) -> String {
    let mut line = format!("{}: L_kappa = {:.9}", report.family, report.closed_form);
    if let (Some(oracle), Some(d), Some(agrees)) =
        (report.oracle, report.critical_distance, report.agrees)
    {
        line.push_str(&format!(
            "  oracle = {oracle:.9} at d* = {d:.6}  agrees = {agrees}"
        ));
    }
    if let Some(table) = report.rq_table_value {
        line.push_str(&format!(
            "  [rq table value {table:.9}{}]",
            match report.rq_table_agrees {
                Some(false) => ", disagrees with oracle (understates the maximum)",
                Some(true) => ", agrees with oracle",
                None => "",
            }
        ));
    }
    let _ = spec;
    line
}

/// Stable listing for run-summary output.
pub fn summarize_metrics(metrics: &Metrics) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("aggregator".into(), metrics.aggregator.clone());
    map.insert("ticks".into(), metrics.ticks.to_string());
    if let Some(mse) = metrics.mse {
        map.insert("mse".into(), format!("{mse:.6e}"));
    }
    if let Some(v) = metrics.bound_violations {
        map.insert("bound_violations".into(), v.to_string());
    }
    map.insert("stream_hash".into(), metrics.stream_hash.clone());
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use asyncgp_core::{rq_corrected_lipschitz, rq_critical_distance};

    #[test]
    fn out_root_resolution_prefers_flag() {
        let flag = PathBuf::from("/tmp/x");
        assert_eq!(resolve_out_root(Some(&flag)), flag);
    }

    #[test]
    fn kernel_report_rq_discrepancy_is_visible() {
        let spec = KernelSpec::rq(1.0, 1.0, 2.0, 1).unwrap();
        let rep = kernel_report(&spec, true, None, 2000).unwrap();
        assert_eq!(rep.rq_table_agrees, Some(false));
        assert_eq!(rep.agrees, Some(true));
        let corrected = rq_corrected_lipschitz(&spec);
        assert!((rep.closed_form - corrected).abs() < 1e-15);
        assert!(rep.rq_table_value.unwrap() < corrected);
        let d_star = rq_critical_distance(&spec);
        assert!((rep.critical_distance.unwrap() - d_star).abs() < 1e-5);
        let line = format_kernel_line(&spec, &rep);
        assert!(line.contains("disagrees"));
    }
}
