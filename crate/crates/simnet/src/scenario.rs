//! Scenario files: everything one reproducible run needs.
//!
//! A scenario is plain JSON (see `ScenarioConfig`) naming the nodes with
//! their GP configs and link models, the broadcast interval, the information
//! set capacity 𝔍̄, the aggregator under test, the stream, and the master
//! seed. `ScenarioConfig::table2` builds the stock four-node preset with
//! per-node buffer caps 100/50/500/1000.

use asyncgp_core::{AggregatorKind, GPConfig, KernelSpec, ResponsibilityRule};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sampler::{ComputeModel, DelayDist, DelaySampler};
use crate::stream::{PathSpec, StreamSource, SyntheticStream};

/// One expert node: GP configuration plus timing models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub gp: GPConfig,
    /// How often the node polls for pending queries/training data.
    pub listen_hz: f64,
    pub compute: ComputeModel,
    /// Coordinator -> node link.
    pub downlink: DelaySampler,
    /// Node -> coordinator link.
    pub uplink: DelaySampler,
}

impl NodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.gp.validate().map_err(SimError::Core)?;
        if !(self.listen_hz.is_finite() && self.listen_hz > 0.0 && self.listen_hz <= 1e6) {
            return Err(SimError::Validation(
                "listen_hz must be in (0, 1e6] (microsecond clock)".into(),
            ));
        }
        self.compute.validate()?;
        self.downlink.validate()?;
        self.uplink.validate()?;
        Ok(())
    }
}

/// How stream samples are dispatched to experts as training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SampleDispatch {
    /// Queries only; experts keep their pretraining buffers.
    None,
    /// Sample i goes to node i mod M.
    #[default]
    RoundRobin,
    /// Every node receives every sample.
    All,
}

/// Where pretraining inputs are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PretrainPlacement {
    /// Evenly spaced along the query path over the run horizon (synthetic
    /// streams) or the first rows (CSV streams).
    #[default]
    Path,
    /// Uniform in the stream domain box (synthetic only).
    Domain,
}

/// How pretraining points are assigned to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PretrainAssign {
    /// All nodes see the same input locations (targets keep independent
    /// noise), so posterior variances coincide across nodes.
    #[default]
    Shared,
    /// Point i goes to node i mod M.
    RoundRobin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub n_points: usize,
    /// Observation noise applied to pretraining targets.
    pub noise_std: f64,
    #[serde(default)]
    pub placement: PretrainPlacement,
    #[serde(default)]
    pub assign: PretrainAssign,
}

/// Regression vs control experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Regression,
    Control,
}

/// Control-task section, consumed by the tracking-control layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSection {
    /// Feedback gains (g_0 .. g_{n-1}); the error matrix is companion-form
    /// with last row -gains.
    pub gains: Vec<f64>,
    /// RK4 step in seconds.
    pub step_s: f64,
    /// Reference amplitude range [lo, hi].
    pub amplitude_range: (f64, f64),
    /// Reference period range [lo, hi] in seconds.
    pub period_range: (f64, f64),
    /// Initial-state box per component.
    pub initial_box: (f64, f64),
    /// Monte-Carlo repetitions.
    pub runs: usize,
}

/// A full simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub broadcast_interval_s: f64,
    /// Information set capacity 𝔍̄.
    pub info_capacity: usize,
    pub aggregator: AggregatorKind,
    #[serde(default)]
    pub responsibility: ResponsibilityRule,
    #[serde(default)]
    pub mode: Mode,
    pub nodes: Vec<NodeConfig>,
    pub stream: StreamSource,
    #[serde(default)]
    pub pretrain: Option<PretrainConfig>,
    #[serde(default)]
    pub dispatch: SampleDispatch,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSection>,
}

fn default_max_events() -> u64 {
    10_000_000
}

impl ScenarioConfig {
    /// Parse and validate a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| SimError::Validation(format!("scenario JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(SimError::Validation("at least one node is required".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0 && self.duration_s <= 1e6) {
            return Err(SimError::Validation("duration must be in (0, 1e6] seconds".into()));
        }
        // The clock ticks in integer microseconds; intervals below 1 us
        // would collapse to zero and spin at one timestamp.
        if !(self.broadcast_interval_s.is_finite() && self.broadcast_interval_s >= 1e-6) {
            return Err(SimError::Validation("broadcast interval must be >= 1e-6 s".into()));
        }
        if self.info_capacity == 0 {
            return Err(SimError::Validation("info capacity must be >= 1".into()));
        }
        if self.max_events == 0 {
            return Err(SimError::Validation("event budget must be >= 1".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            node.validate()
                .map_err(|e| SimError::Validation(format!("node {i}: {e}")))?;
        }
        self.stream.validate()?;

        let dim = self.stream.dim()?;
        let head = &self.nodes[0].gp;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.gp.kernel.dim() != dim {
                return Err(SimError::Validation(format!(
                    "node {i}: kernel dim {} != stream dim {dim}",
                    node.gp.kernel.dim()
                )));
            }
            // The coordinator computes one eta per record; that needs a
            // single (kernel, beta, gamma, prior mean) across experts.
            if node.gp.kernel != head.kernel
                || node.gp.beta != head.beta
                || node.gp.gamma != head.gamma
                || node.gp.prior_mean_const != head.prior_mean_const
            {
                return Err(SimError::Validation(format!(
                    "node {i}: kernel/beta/gamma/prior mean must match node 0 (shared bound machinery)"
                )));
            }
        }
        if let Some(p) = &self.pretrain {
            if p.n_points == 0 {
                return Err(SimError::Validation("pretrain.n_points must be >= 1".into()));
            }
            if !(p.noise_std.is_finite() && p.noise_std >= 0.0) {
                return Err(SimError::Validation("pretrain.noise_std must be >= 0".into()));
            }
            if p.placement == PretrainPlacement::Domain
                && !matches!(self.stream, StreamSource::Synthetic(_))
            {
                return Err(SimError::Validation(
                    "domain pretraining requires a synthetic stream".into(),
                ));
            }
        }
        if let Some(c) = &self.control {
            if c.gains.is_empty() {
                return Err(SimError::Validation("control.gains must be non-empty".into()));
            }
            if !(c.step_s.is_finite() && c.step_s > 0.0 && c.step_s <= 0.02) {
                return Err(SimError::Validation("control.step_s must be in (0, 0.02]".into()));
            }
            if c.runs == 0 {
                return Err(SimError::Validation("control.runs must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// The coordinator-side GP parameters (validated identical across nodes).
    pub fn coordinator_gp(&self) -> &GPConfig {
        &self.nodes[0].gp
    }

    /// Stock four-node preset with buffer caps 100/50/500/1000, 0.02 s
    /// exchange interval, 1 kHz listening, and a shared-pretraining synthetic
    /// stream on a circular path.
    pub fn table2(seed: u64, info_capacity: usize, aggregator: AggregatorKind) -> Self {
        let kernel = KernelSpec::ard_se(1.0, vec![1.0, 1.0]).expect("static spec");
        let caps = [100usize, 50, 500, 1000];
        let local_models = [100usize, 200, 50, 20];
        let nodes = caps
            .iter()
            .zip(local_models)
            .enumerate()
            .map(|(i, (&cap, lm))| NodeConfig {
                gp: GPConfig {
                    kernel: kernel.clone(),
                    noise_std: 0.5,
                    prior_mean_const: 0.0,
                    beta: 2.0,
                    gamma: 2.0,
                    max_data: cap,
                    max_local_models: Some(lm),
                    overlap_rate: Some(0.01),
                },
                listen_hz: 1000.0,
                compute: ComputeModel::Affine { base_s: 1e-3, per_point_s: 5e-6 },
                downlink: DelaySampler {
                    dist: DelayDist::Uniform { lo: 0.5e-3, hi: 2.0e-3 },
                    seed: seed ^ (0x10 + i as u64),
                },
                uplink: DelaySampler {
                    dist: DelayDist::Uniform { lo: 0.5e-3, hi: 2.0e-3 },
                    seed: seed ^ (0x20 + i as u64),
                },
            })
            .collect();

        ScenarioConfig {
            seed,
            duration_s: 10.0,
            broadcast_interval_s: 0.02,
            info_capacity,
            aggregator,
            responsibility: ResponsibilityRule::LogRatio,
            mode: Mode::Regression,
            nodes,
            // Noiseless targets keep the experts inside the deterministic
            // RKHS error bound |f - mu| <= Gamma * sigma <= beta * sigma, so
            // fused-bound violations are detectable as real defects.
            stream: StreamSource::Synthetic(SyntheticStream {
                kernel,
                domain: vec![(-2.5, 2.5), (-2.5, 2.5)],
                n_centers: 12,
                norm_target: 1.6,
                path: PathSpec::Circle { center: [0.0, 0.0], radius: 2.0, speed: 0.5 },
                sample_rate_hz: 50.0,
                noise_std: 0.0,
                seed: seed ^ 0x5EED,
            }),
            pretrain: Some(PretrainConfig {
                n_points: 50,
                noise_std: 0.0,
                placement: PretrainPlacement::Path,
                assign: PretrainAssign::Shared,
            }),
            dispatch: SampleDispatch::None,
            max_events: default_max_events(),
            control: None,
        }
    }

    /// Table 2 preset with one node stalled by a long compute time, used to
    /// reproduce the sawtooth delay-trace shape.
    pub fn table2_stalled(seed: u64, info_capacity: usize, aggregator: AggregatorKind) -> Self {
        let mut cfg = Self::table2(seed, info_capacity, aggregator);
        cfg.nodes[3].compute = ComputeModel::Constant { seconds: 0.11 };
        cfg
    }

    /// Control-task preset: second-order plant with a smooth synthetic drift
    /// on [-3,3]², 1000 round-robin training samples, 20 s horizon, 0.02 s
    /// exchange interval, 100 Monte-Carlo repetitions.
    pub fn control_task(seed: u64) -> Self {
        let mut cfg = Self::table2(seed, 4, AggregatorKind::AsyncDgp);
        cfg.mode = Mode::Control;
        let kernel = cfg.nodes[0].gp.kernel.clone();
        cfg.duration_s = 20.0;
        cfg.stream = StreamSource::Synthetic(SyntheticStream {
            kernel,
            domain: vec![(-3.0, 3.0), (-3.0, 3.0)],
            n_centers: 3,
            norm_target: 1.5,
            path: PathSpec::Circle { center: [0.0, 0.0], radius: 2.0, speed: 0.5 },
            sample_rate_hz: 50.0,
            noise_std: 0.0,
            seed: seed ^ 0x5EED,
        });
        cfg.pretrain = Some(PretrainConfig {
            n_points: 1000,
            noise_std: 0.0,
            placement: PretrainPlacement::Domain,
            assign: PretrainAssign::RoundRobin,
        });
        cfg.control = Some(ControlSection {
            gains: vec![2.0, 3.0],
            step_s: 0.002,
            amplitude_range: (0.4, 0.6),
            period_range: (3.0, 5.0),
            initial_box: (0.0, 1.0),
            runs: 100,
        });
        cfg
    }
}
