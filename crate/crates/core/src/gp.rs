//! Per-node online GP regression with a capped FIFO training buffer.
//!
//! Each expert holds at most `max_data` samples; once full, the oldest sample
//! is evicted before a new one enters. The Cholesky factor of K + σ_n²I is
//! maintained incrementally (bordering on insert, rank-1 update on eviction),
//! falling back to refactorization with a jitter ladder when conditioning
//! degrades.
//!
//! Posterior at a query x with buffer (X, y):
//!
//! ```text
//! μ(x)  = m + k(x)ᵀ (K + σ_n²I)⁻¹ (y − m)
//! σ²(x) = κ(x,x) − k(x)ᵀ (K + σ_n²I)⁻¹ k(x)     (floored at 0)
//! ```
//!
//! An empty buffer returns the prior (m, σ_f).

use serde::{Deserialize, Serialize};

use crate::chol::CholeskyFactor;
use crate::error::{CoreError, Result};
use crate::kernel::{KernelFamily, KernelSpec};

/// Configuration of one GP expert.
///
/// `beta` is the confidence scale of the uniform error bound |f − μ| ≤ βσ and
/// `gamma` bounds the RKHS norm of the latent function; both are inputs here,
/// not derived quantities. `max_local_models` and `overlap_rate` are accepted
/// for config-file fidelity with tree-structured local-expert setups but the
/// capped exact GP ignores them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GPConfig {
    pub kernel: KernelSpec,
    pub noise_std: f64,
    #[serde(default)]
    pub prior_mean_const: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub max_data: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_local_models: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_rate: Option<f64>,
}

fn default_beta() -> f64 {
    2.0
}

fn default_gamma() -> f64 {
    1.0
}

impl GPConfig {
    pub fn new(kernel: KernelSpec, noise_std: f64, beta: f64, gamma: f64, max_data: usize) -> Result<Self> {
        let cfg = Self {
            kernel,
            noise_std,
            prior_mean_const: 0.0,
            beta,
            gamma,
            max_data,
            max_local_models: None,
            overlap_rate: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(CoreError::invalid("noise_std", self.noise_std, "must be finite and > 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(CoreError::invalid("beta", self.beta, "must be finite and > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(CoreError::invalid("gamma", self.gamma, "must be finite and > 0"));
        }
        if self.max_data == 0 {
            return Err(CoreError::invalid("max_data", self.max_data, "must be >= 1"));
        }
        if !self.prior_mean_const.is_finite() {
            return Err(CoreError::invalid("prior_mean_const", self.prior_mean_const, "must be finite"));
        }
        Ok(())
    }

    /// The prior bound βσ_f that every delayed-error comparison uses.
    pub fn beta_sigma_f(&self) -> f64 {
        self.beta * self.kernel.sigma_f()
    }
}

/// Posterior mean and standard deviation at one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
}

/// FIFO training buffer with a hard capacity.
#[derive(Debug, Clone, Default)]
pub struct TrainingBuffer {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    capacity: usize,
}

impl TrainingBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { xs: Vec::new(), ys: Vec::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.iter().map(|x| x.as_slice()).zip(self.ys.iter().copied())
    }
}

/// One expert's mutable regression state.
#[derive(Debug, Clone)]
pub struct GPState {
    cfg: GPConfig,
    buffer: TrainingBuffer,
    chol: CholeskyFactor,
    /// (K + σ_n²I)⁻¹ (y − m), refreshed after every buffer change.
    alpha: Vec<f64>,
    /// Diagonal jitter currently folded into the factor (0 until the ladder
    /// is needed).
    jitter: f64,
}

const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

impl GPState {
    pub fn new(cfg: GPConfig) -> Result<Self> {
        cfg.validate()?;
        let capacity = cfg.max_data;
        Ok(Self {
            cfg,
            buffer: TrainingBuffer::new(capacity),
            chol: CholeskyFactor::empty(),
            alpha: Vec::new(),
            jitter: 0.0,
        })
    }

    pub fn config(&self) -> &GPConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &TrainingBuffer {
        &self.buffer
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Incorporate one observation, evicting the oldest sample if the buffer
    /// is at capacity.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.cfg.kernel.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.cfg.kernel.dim(),
                got: x.len(),
                context: "gp_update input",
            });
        }
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(CoreError::NonFinite { context: "gp_update sample".to_string() });
        }

        if self.buffer.len() == self.buffer.capacity {
            self.chol.drop_first();
            self.buffer.xs.remove(0);
            self.buffer.ys.remove(0);
        }

        let col: Vec<f64> = self
            .buffer
            .xs
            .iter()
            .map(|xi| self.cfg.kernel.eval(xi, x))
            .collect::<Result<_>>()?;
        let noise = self.cfg.noise_std * self.cfg.noise_std + self.jitter;
        let diag = self.cfg.kernel.eval(x, x)? + noise;

        if self.chol.append(&col, diag).is_err() {
            // Conditioning failed; climb the jitter ladder with a rebuild.
            self.buffer.xs.push(x.to_vec());
            self.buffer.ys.push(y);
            self.refactor()?;
        } else {
            self.buffer.xs.push(x.to_vec());
            self.buffer.ys.push(y);
        }

        self.refresh_alpha();
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        for &jitter in JITTER_LADDER.iter().filter(|&&j| j > self.jitter) {
            if let Ok(chol) = self.try_factor(jitter) {
                self.chol = chol;
                self.jitter = jitter;
                return Ok(());
            }
        }
        Err(CoreError::CholeskyFailure {
            max_jitter: *JITTER_LADDER.last().unwrap(),
        })
    }

    fn try_factor(&self, jitter: f64) -> Result<CholeskyFactor> {
        let noise = self.cfg.noise_std * self.cfg.noise_std + jitter;
        let mut chol = CholeskyFactor::empty();
        for (i, xi) in self.buffer.xs.iter().enumerate() {
            let col: Vec<f64> = self.buffer.xs[..i]
                .iter()
                .map(|xj| self.cfg.kernel.eval(xj, xi))
                .collect::<Result<_>>()?;
            let diag = self.cfg.kernel.eval(xi, xi)? + noise;
            chol.append(&col, diag)?;
        }
        Ok(chol)
    }

    fn refresh_alpha(&mut self) {
        let m = self.cfg.prior_mean_const;
        let rhs: Vec<f64> = self.buffer.ys.iter().map(|y| y - m).collect();
        self.alpha = self.chol.solve(&rhs);
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Posterior> {
        if x.len() != self.cfg.kernel.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.cfg.kernel.dim(),
                got: x.len(),
                context: "gp_predict input",
            });
        }
        let m = self.cfg.prior_mean_const;
        let prior_var = self.cfg.kernel.eval(x, x)?;

        if self.buffer.is_empty() {
            let std = if self.cfg.kernel.family() == KernelFamily::Linear {
                prior_var.max(0.0).sqrt()
            } else {
                self.cfg.kernel.sigma_f()
            };
            return Ok(Posterior { mean: m, std });
        }

        let k: Vec<f64> = self
            .buffer
            .xs
            .iter()
            .map(|xi| self.cfg.kernel.eval(xi, x))
            .collect::<Result<_>>()?;
        let mut mean = m;
        for (ki, ai) in k.iter().zip(&self.alpha) {
            mean += ki * ai;
        }

        let z = self.chol.solve_lower(&k);
        let explained: f64 = z.iter().map(|v| v * v).sum();
        let mut var = (prior_var - explained).max(0.0);
        // For stationary kernels κ(x,x) = σ_f², so σ ≤ σ_f in exact
        // arithmetic; the clamp only removes floating-point overshoot.
        if self.cfg.kernel.family() != KernelFamily::Linear {
            var = var.min(prior_var);
        }
        let mut std = var.sqrt();
        if self.cfg.kernel.family() != KernelFamily::Linear {
            std = std.min(self.cfg.kernel.sigma_f());
        }

        if !mean.is_finite() || !std.is_finite() {
            return Err(CoreError::NonFinite { context: "gp_predict posterior".to_string() });
        }
        Ok(Posterior { mean, std })
    }
}

/// The uniform prediction error bound βσ(x) of one posterior.
pub fn error_bound(cfg: &GPConfig, post: &Posterior) -> f64 {
    cfg.beta * post.std
}
