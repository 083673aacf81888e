//! Seeded, index-addressable samplers for link delays and compute latency.
//!
//! Determinism contract: a sampler is a pure function of (seed, sequence
//! index). Replaying a run never consumes RNG state out of order, because no
//! state is carried between draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Delay distribution of one directional link.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayDist {
    /// Fixed delay in seconds.
    Constant { seconds: f64 },
    /// Uniform on [lo, hi] seconds.
    Uniform { lo: f64, hi: f64 },
    /// exp(N(mu_log, sigma_log)) seconds.
    LogNormal { mu_log: f64, sigma_log: f64 },
    /// Replay a recorded delay series, cycling past the end.
    TraceReplay { values: Vec<f64> },
}

/// A seeded delay sampler; `sample(i)` depends only on (seed, i).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DelaySampler {
    pub dist: DelayDist,
    #[serde(default)]
    pub seed: u64,
}

impl DelaySampler {
    pub fn constant(seconds: f64) -> Self {
        Self { dist: DelayDist::Constant { seconds }, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SimError::Validation(format!("delay sampler: {msg}")));
        match &self.dist {
            DelayDist::Constant { seconds } => {
                if !(seconds.is_finite() && *seconds >= 0.0) {
                    return bad("constant delay must be finite and >= 0");
                }
            }
            DelayDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi >= lo) {
                    return bad("uniform delay needs 0 <= lo <= hi");
                }
            }
            DelayDist::LogNormal { mu_log, sigma_log } => {
                if !(mu_log.is_finite() && sigma_log.is_finite() && *sigma_log >= 0.0) {
                    return bad("log-normal delay needs finite mu and sigma >= 0");
                }
            }
            DelayDist::TraceReplay { values } => {
                if values.is_empty() {
                    return bad("trace replay needs at least one value");
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("trace replay values must be finite and >= 0");
                }
            }
        }
        Ok(())
    }

    /// Delay in seconds for sequence index `index`.
    pub fn sample(&self, index: u64) -> f64 {
        match &self.dist {
            DelayDist::Constant { seconds } => *seconds,
            DelayDist::Uniform { lo, hi } => {
                if hi == lo {
                    *lo
                } else {
                    let mut rng = indexed_rng(self.seed, index);
                    rng.random_range(*lo..*hi)
                }
            }
            DelayDist::LogNormal { mu_log, sigma_log } => {
                let mut rng = indexed_rng(self.seed, index);
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                (mu_log + sigma_log * z).exp()
            }
            DelayDist::TraceReplay { values } => values[(index % values.len() as u64) as usize],
        }
    }
}

/// Per-prediction compute latency.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComputeModel {
    /// Fixed latency in seconds.
    Constant { seconds: f64 },
    /// base + per_point * buffer_len seconds, so bigger experts are slower.
    Affine { base_s: f64, per_point_s: f64 },
    /// Replay measured per-prediction latencies, cycling past the end.
    Measured { values: Vec<f64> },
}

impl ComputeModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SimError::Validation(format!("compute model: {msg}")));
        match self {
            ComputeModel::Constant { seconds } => {
                if !(seconds.is_finite() && *seconds >= 0.0) {
                    return bad("constant latency must be finite and >= 0");
                }
            }
            ComputeModel::Affine { base_s, per_point_s } => {
                if !(base_s.is_finite() && per_point_s.is_finite() && *base_s >= 0.0 && *per_point_s >= 0.0)
                {
                    return bad("affine latency needs base >= 0 and per-point >= 0");
                }
            }
            ComputeModel::Measured { values } => {
                if values.is_empty() {
                    return bad("measured latency needs at least one value");
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("measured values must be finite and >= 0");
                }
            }
        }
        Ok(())
    }

    /// Latency in seconds of the node's `index`-th prediction over a buffer
    /// of `buffer_len` samples.
    pub fn latency(&self, index: u64, buffer_len: usize) -> f64 {
        match self {
            ComputeModel::Constant { seconds } => *seconds,
            ComputeModel::Affine { base_s, per_point_s } => base_s + per_point_s * buffer_len as f64,
            ComputeModel::Measured { values } => values[(index % values.len() as u64) as usize],
        }
    }
}

fn indexed_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // SplitMix64-style mix so that nearby (seed, index) pairs decorrelate.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
