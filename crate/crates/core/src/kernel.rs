//! Kernel families, their scalar distance functions, and pointwise evaluation.
//!
//! Every supported kernel factors through a scalar distance `d(x, x')`:
//!
//! | Family   | Kernel κ(x, x')                                  | Distance d(x, x')       |
//! |----------|--------------------------------------------------|-------------------------|
//! | Linear   | σ_l² (x−c)ᵀ(x'−c) + σ_b²                         | (x−c)ᵀ(x'−c)            |
//! | SE       | σ_f² exp(−‖x−x'‖² / (2σ_l²))                     | ‖x−x'‖                  |
//! | ARD-SE   | σ_f² exp(−(x−x')ᵀ Σ_L⁻² (x−x') / 2)              | ‖Σ_L⁻¹(x−x')‖           |
//! | RQ       | σ_f² (1 + ‖x−x'‖² / (2ασ_l²))^(−α)               | ‖x−x'‖                  |
//! | Periodic | σ_f² exp(−2 sin²(π‖x−x'‖/p) / σ_l²)              | ‖x−x'‖                  |
//!
//! The factorisation `eval = eval_at_distance ∘ distance` holds exactly, which
//! is what makes the one-dimensional Lipschitz analysis in [`crate::lipschitz`]
//! applicable. Note that the Linear distance is sign-indefinite and does not
//! vanish at x = x'; downstream consumers that need √d clamp it at zero.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// The five supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Linear,
    Se,
    ArdSe,
    Rq,
    Periodic,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Linear => "linear",
            KernelFamily::Se => "se",
            KernelFamily::ArdSe => "ard-se",
            KernelFamily::Rq => "rq",
            KernelFamily::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelFamily::Linear),
            "se" => Ok(KernelFamily::Se),
            "ard-se" | "ardse" | "ard_se" => Ok(KernelFamily::ArdSe),
            "rq" => Ok(KernelFamily::Rq),
            "periodic" => Ok(KernelFamily::Periodic),
            other => Err(CoreError::invalid(
                "family",
                other,
                "expected one of linear, se, ard-se, rq, periodic",
            )),
        }
    }
}

/// A validated kernel: family plus hyperparameters.
///
/// Construct through the per-family constructors ([`KernelSpec::se`],
/// [`KernelSpec::ard_se`], ...) or [`KernelSpec::from_params`]; all of them
/// reject non-positive scales so that every held value satisfies the family's
/// parameter constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    sigma_f: f64,
    sigma_l: f64,
    sigma_b: f64,
    center: Vec<f64>,
    lengthscales: Vec<f64>,
    alpha: f64,
    period: f64,
    dim: usize,
}

/// Serde-facing mirror of [`KernelSpec`]; deserialization funnels through
/// validation so that a config file cannot smuggle in a bad spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawKernelSpec {
    family: KernelFamily,
    #[serde(default = "one")]
    sigma_f: f64,
    #[serde(default = "one")]
    sigma_l: f64,
    #[serde(default)]
    sigma_b: f64,
    #[serde(default)]
    center: Vec<f64>,
    #[serde(default)]
    lengthscales: Vec<f64>,
    #[serde(default = "one")]
    alpha: f64,
    #[serde(default = "one")]
    period: f64,
    dim: usize,
}

fn one() -> f64 {
    1.0
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(s: KernelSpec) -> Self {
        RawKernelSpec {
            family: s.family,
            sigma_f: s.sigma_f,
            sigma_l: s.sigma_l,
            sigma_b: s.sigma_b,
            center: s.center,
            lengthscales: s.lengthscales,
            alpha: s.alpha,
            period: s.period,
            dim: s.dim,
        }
    }
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = CoreError;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        let RawKernelSpec {
            family,
            sigma_f,
            sigma_l,
            sigma_b,
            center,
            lengthscales,
            alpha,
            period,
            dim,
        } = raw;
        match family {
            KernelFamily::Linear => {
                let center = if center.is_empty() { vec![0.0; dim] } else { center };
                KernelSpec::linear(sigma_l, sigma_b, center)
            }
            KernelFamily::Se => KernelSpec::se(sigma_f, sigma_l, dim),
            KernelFamily::ArdSe => {
                let ls = if lengthscales.is_empty() {
                    vec![sigma_l; dim]
                } else {
                    lengthscales
                };
                KernelSpec::ard_se(sigma_f, ls)
            }
            KernelFamily::Rq => KernelSpec::rq(sigma_f, sigma_l, alpha, dim),
            KernelFamily::Periodic => KernelSpec::periodic(sigma_f, sigma_l, period, dim),
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(CoreError::invalid(name, v, "must be finite and > 0"));
    }
    Ok(())
}

impl KernelSpec {
    /// Squared-exponential kernel σ_f² exp(−‖x−x'‖²/(2σ_l²)).
    pub fn se(sigma_f: f64, sigma_l: f64, dim: usize) -> Result<Self> {
        require_positive("sigma_f", sigma_f)?;
        require_positive("sigma_l", sigma_l)?;
        require_dim(dim)?;
        Ok(Self {
            family: KernelFamily::Se,
            sigma_f,
            sigma_l,
            sigma_b: 0.0,
            center: Vec::new(),
            lengthscales: Vec::new(),
            alpha: 1.0,
            period: 1.0,
            dim,
        })
    }

    /// ARD squared-exponential with one lengthscale per input dimension.
    pub fn ard_se(sigma_f: f64, lengthscales: Vec<f64>) -> Result<Self> {
        require_positive("sigma_f", sigma_f)?;
        if lengthscales.is_empty() {
            return Err(CoreError::invalid(
                "lengthscales",
                "[]",
                "ARD-SE needs at least one lengthscale",
            ));
        }
        for (i, &l) in lengthscales.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(CoreError::invalid(
                    &format!("lengthscales[{i}]"),
                    l,
                    "must be finite and > 0",
                ));
            }
        }
        let dim = lengthscales.len();
        Ok(Self {
            family: KernelFamily::ArdSe,
            sigma_f,
            sigma_l: 1.0,
            sigma_b: 0.0,
            center: Vec::new(),
            lengthscales,
            alpha: 1.0,
            period: 1.0,
            dim,
        })
    }

    /// Linear kernel σ_l²(x−c)ᵀ(x'−c) + σ_b². `sigma_b` may be zero.
    pub fn linear(sigma_l: f64, sigma_b: f64, center: Vec<f64>) -> Result<Self> {
        require_positive("sigma_l", sigma_l)?;
        if !(sigma_b.is_finite() && sigma_b >= 0.0) {
            return Err(CoreError::invalid("sigma_b", sigma_b, "must be finite and >= 0"));
        }
        if center.is_empty() {
            return Err(CoreError::invalid("center", "[]", "center fixes the input dimension"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::invalid("center", "non-finite", "must be finite"));
        }
        let dim = center.len();
        Ok(Self {
            family: KernelFamily::Linear,
            // For the Linear family sigma_f is unused by the kernel itself,
            // but sigma_f^2 is still a convenient prior scale; keep it at 1.
            sigma_f: 1.0,
            sigma_l,
            sigma_b,
            center,
            lengthscales: Vec::new(),
            alpha: 1.0,
            period: 1.0,
            dim,
        })
    }

    /// Rational-quadratic kernel σ_f²(1 + ‖x−x'‖²/(2ασ_l²))^(−α).
    pub fn rq(sigma_f: f64, sigma_l: f64, alpha: f64, dim: usize) -> Result<Self> {
        require_positive("sigma_f", sigma_f)?;
        require_positive("sigma_l", sigma_l)?;
        require_positive("alpha", alpha)?;
        require_dim(dim)?;
        Ok(Self {
            family: KernelFamily::Rq,
            sigma_f,
            sigma_l,
            sigma_b: 0.0,
            center: Vec::new(),
            lengthscales: Vec::new(),
            alpha,
            period: 1.0,
            dim,
        })
    }

    /// Periodic kernel σ_f² exp(−2 sin²(π‖x−x'‖/p)/σ_l²) with period `p`.
    pub fn periodic(sigma_f: f64, sigma_l: f64, period: f64, dim: usize) -> Result<Self> {
        require_positive("sigma_f", sigma_f)?;
        require_positive("sigma_l", sigma_l)?;
        require_positive("period", period)?;
        require_dim(dim)?;
        Ok(Self {
            family: KernelFamily::Periodic,
            sigma_f,
            sigma_l,
            sigma_b: 0.0,
            center: Vec::new(),
            lengthscales: Vec::new(),
            alpha: 1.0,
            period,
            dim,
        })
    }

    /// Build a spec from a family name and `key=value,...` parameter list, the
    /// format taken by `asyncgp kernels lipschitz --params`.
    ///
    /// Recognised keys: `sigma_f`, `sigma_l`, `sigma_b`, `alpha`, `period`,
    /// `dim`, `center` (colon-separated), `lengthscales` (colon-separated).
    pub fn from_params(family: &str, params: &str) -> Result<Self> {
        let family: KernelFamily = family.parse()?;
        let mut sigma_f = 1.0;
        let mut sigma_l = 1.0;
        let mut sigma_b = 0.0;
        let mut alpha = 1.0;
        let mut period = 1.0;
        let mut dim = 1usize;
        let mut center: Vec<f64> = Vec::new();
        let mut lengthscales: Vec<f64> = Vec::new();

        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CoreError::invalid("params", item, "expected key=value"))?;
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| CoreError::invalid(key, v, "expected a number"))
            };
            let parse_vec = |v: &str| -> Result<Vec<f64>> {
                v.split(':')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| CoreError::invalid(key, s, "expected a number"))
                    })
                    .collect()
            };
            match key {
                "sigma_f" => sigma_f = parse_f64(value)?,
                "sigma_l" => sigma_l = parse_f64(value)?,
                "sigma_b" => sigma_b = parse_f64(value)?,
                "alpha" => alpha = parse_f64(value)?,
                "period" | "p" => period = parse_f64(value)?,
                "dim" | "n" => {
                    dim = value
                        .parse::<usize>()
                        .map_err(|_| CoreError::invalid(key, value, "expected a positive integer"))?
                }
                "center" | "c" => center = parse_vec(value)?,
                "lengthscales" | "ls" => lengthscales = parse_vec(value)?,
                other => {
                    return Err(CoreError::invalid("params", other, "unknown parameter key"));
                }
            }
        }

        match family {
            KernelFamily::Se => KernelSpec::se(sigma_f, sigma_l, dim),
            KernelFamily::ArdSe => {
                let ls = if lengthscales.is_empty() {
                    vec![sigma_l; dim]
                } else {
                    lengthscales
                };
                KernelSpec::ard_se(sigma_f, ls)
            }
            KernelFamily::Linear => {
                let c = if center.is_empty() { vec![0.0; dim] } else { center };
                KernelSpec::linear(sigma_l, sigma_b, c)
            }
            KernelFamily::Rq => KernelSpec::rq(sigma_f, sigma_l, alpha, dim),
            KernelFamily::Periodic => KernelSpec::periodic(sigma_f, sigma_l, period, dim),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Signal scale σ_f. For the Linear family this is a nominal 1.0; the
    /// self-similarity κ(x,x) of a Linear kernel depends on x instead.
    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }

    pub fn sigma_l(&self) -> f64 {
        self.sigma_l
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn check_dims(&self, x: &[f64], x2: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context,
            });
        }
        if x2.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: x2.len(),
                context,
            });
        }
        Ok(())
    }

    /// The kernel's scalar distance function.
    ///
    /// Norm-based for SE/RQ/Periodic, lengthscale-weighted norm for ARD-SE,
    /// and the centered inner product (x−c)ᵀ(x'−c) for Linear. Only the
    /// Linear value can be negative.
    pub fn distance(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_dims(x, x2, "kernel distance")?;
        let d = match self.family {
            KernelFamily::Se | KernelFamily::Rq | KernelFamily::Periodic => {
                euclidean(x, x2)
            }
            KernelFamily::ArdSe => {
                let mut sum = 0.0;
                for i in 0..self.dim {
                    let s = (x[i] - x2[i]) / self.lengthscales[i];
                    sum += s * s;
                }
                sum.sqrt()
            }
            KernelFamily::Linear => {
                let mut dot = 0.0;
                for i in 0..self.dim {
                    dot += (x[i] - self.center[i]) * (x2[i] - self.center[i]);
                }
                dot
            }
        };
        if !d.is_finite() {
            return Err(CoreError::NonFinite {
                context: "kernel distance".to_string(),
            });
        }
        Ok(d)
    }

    /// κ(x, x').
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let d = self.distance(x, x2)?;
        Ok(self.eval_at_distance(d))
    }

    /// κ as a function of its scalar distance argument.
    pub fn eval_at_distance(&self, d: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => self.sigma_l * self.sigma_l * d + self.sigma_b * self.sigma_b,
            KernelFamily::Se => {
                let sf2 = self.sigma_f * self.sigma_f;
                sf2 * (-d * d / (2.0 * self.sigma_l * self.sigma_l)).exp()
            }
            KernelFamily::ArdSe => {
                let sf2 = self.sigma_f * self.sigma_f;
                sf2 * (-0.5 * d * d).exp()
            }
            KernelFamily::Rq => {
                let sf2 = self.sigma_f * self.sigma_f;
                let u = d * d / (2.0 * self.alpha * self.sigma_l * self.sigma_l);
                // (1 + u)^(-alpha) through ln_1p so that large alpha with small
                // u (the SE limit) keeps full precision.
                sf2 * (-self.alpha * u.ln_1p()).exp()
            }
            KernelFamily::Periodic => {
                let sf2 = self.sigma_f * self.sigma_f;
                let s = (std::f64::consts::PI * d / self.period).sin();
                sf2 * (-2.0 * s * s / (self.sigma_l * self.sigma_l)).exp()
            }
        }
    }

    /// |dκ/dd| evaluated at scalar distance `d` — the objective the numerical
    /// Lipschitz oracle maximizes.
    pub fn abs_derivative_at(&self, d: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => self.sigma_l * self.sigma_l,
            KernelFamily::Se => {
                let sl2 = self.sigma_l * self.sigma_l;
                let sf2 = self.sigma_f * self.sigma_f;
                sf2 * d.abs() / sl2 * (-d * d / (2.0 * sl2)).exp()
            }
            KernelFamily::ArdSe => {
                let sf2 = self.sigma_f * self.sigma_f;
                sf2 * d.abs() * (-0.5 * d * d).exp()
            }
            KernelFamily::Rq => {
                let sf2 = self.sigma_f * self.sigma_f;
                let sl2 = self.sigma_l * self.sigma_l;
                let u = d * d / (2.0 * self.alpha * sl2);
                sf2 / sl2 * d.abs() * (-(self.alpha + 1.0) * u.ln_1p()).exp()
            }
            KernelFamily::Periodic => {
                let sf2 = self.sigma_f * self.sigma_f;
                let sl2 = self.sigma_l * self.sigma_l;
                let arg = std::f64::consts::PI * d / self.period;
                let s = arg.sin();
                let c = arg.cos();
                4.0 * std::f64::consts::PI * sf2 / (self.period * sl2)
                    * (s * c).abs()
                    * (-2.0 * s * s / sl2).exp()
            }
        }
    }

    /// κ(x, x): σ_f² for the stationary families, σ_l²‖x−c‖² + σ_b² for Linear.
    pub fn self_similarity(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, x)
    }
}

fn require_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(CoreError::invalid("dim", dim, "input dimension must be >= 1"));
    }
    Ok(())
}

fn euclidean(x: &[f64], x2: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
