//! Confidence-weighted aggregation of stale expert predictions.
//!
//! A coordinator queries M experts and keeps up to 𝔍̄ prediction records,
//! possibly several iterations deep per expert. Because records are stale,
//! each one carries a *delayed* error bound combining function drift with the
//! expert's own confidence:
//!
//! ```text
//! η_i^k(t) = L_f √max(d(x(t), x(t_i^k)), 0) + β σ_i(x(t_i^k))
//! ```
//!
//! which bounds |f(x(t)) − μ_i(x(t_i^k))| whenever ‖f‖_κ ≤ Γ. Records whose η
//! reaches the prior bound βσ_f carry no information beyond the prior and are
//! discarded by [`manage_information_set`].
//!
//! [`asyncdgp_aggregate`] fuses the surviving records with weights
//!
//! ```text
//! ω_k^i(t) = ω²(t) ρ_k^i(t) (η_i^k(t))⁻²        (records)
//! ω_m(t)   = ω²(t) (1 − ρ(t)) (βσ_f)⁻²          (prior mean)
//! ω(t)     = ( Σ ρ_k^i ((η_i^k)⁻² − (βσ_f)⁻²) + (βσ_f)⁻² )^(−1/2)
//! ```
//!
//! where the responsibilities ρ_k^i ≥ 0 sum to ρ(t) ≤ 1 and vanish as
//! η_i^k → βσ_f. The fused error satisfies |f(x(t)) − f̂(x(t))| ≤ ω(t) ≤ βσ_f,
//! with equality in the second inequality exactly when no record contributes.
//!
//! Five conventional aggregators (BCM, rBCM, POE, gPOE, MOE) are implemented
//! verbatim over the same information set for comparison; they weight by
//! posterior variance alone and claim no deterministic error bound.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gp::GPConfig;

/// One expert prediction as received by the coordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    /// Expert index i.
    pub node_id: u32,
    /// Expert-local iteration counter k.
    pub iteration: u64,
    /// The query point x(t_i^k) this prediction answers.
    pub query_point: Vec<f64>,
    /// Posterior mean μ_i(x(t_i^k)).
    pub mean: f64,
    /// Posterior standard deviation σ_i(x(t_i^k)).
    pub std: f64,
    /// Production time t_i^k in seconds.
    pub produced_at: f64,
    /// Coordinator-side delivery time in seconds.
    pub received_at: f64,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(CoreError::invalid("std", self.std, "must be finite and >= 0"));
        }
        if !self.mean.is_finite() {
            return Err(CoreError::invalid("mean", self.mean, "must be finite"));
        }
        if !(self.produced_at.is_finite() && self.received_at.is_finite()) {
            return Err(CoreError::NonFinite { context: "record timestamps".to_string() });
        }
        if self.received_at < self.produced_at {
            return Err(CoreError::invalid(
                "received_at",
                self.received_at,
                "must be >= produced_at",
            ));
        }
        if self.query_point.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { context: "record query point".to_string() });
        }
        Ok(())
    }

    /// Parse one line of a line-delimited JSON trace and validate invariants.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| {
            CoreError::invalid("record", line.trim(), &format!("invalid JSON: {e}"))
        })?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}

/// Bounded collection of prediction records held by the coordinator.
#[derive(Debug, Clone)]
pub struct InformationSet {
    records: Vec<PredictionRecord>,
    capacity: usize,
}

impl InformationSet {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::invalid("capacity", capacity, "must be >= 1"));
        }
        Ok(Self { records: Vec::new(), capacity })
    }

    /// Assemble a set from given records without the η-based management pass
    /// (the baseline aggregators accept any record set). Capacity and record
    /// invariants still apply.
    pub fn with_records(capacity: usize, records: Vec<PredictionRecord>) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::invalid("capacity", capacity, "must be >= 1"));
        }
        if records.len() > capacity {
            return Err(CoreError::invalid(
                "records",
                records.len(),
                "more records than the set capacity",
            ));
        }
        for r in &records {
            r.validate()?;
        }
        Ok(Self { records, capacity })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Latest retained iteration k̄_i for a node, if any record survives.
    pub fn latest_iteration(&self, node_id: u32) -> Option<u64> {
        self.records
            .iter()
            .filter(|r| r.node_id == node_id)
            .map(|r| r.iteration)
            .max()
    }

    /// Node ids with at least one retained record, ascending.
    pub fn node_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.node_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Delayed prediction error bound η_i^k(t) of one record at the query `x_now`.
///
/// `l_f` is the function Lipschitz constant Γ√(2L_κ); the kernel distance is
/// clamped at zero before the square root (the Linear distance is
/// sign-indefinite).
pub fn delayed_error_bound(
    record: &PredictionRecord,
    x_now: &[f64],
    cfg: &GPConfig,
    l_f: f64,
) -> Result<f64> {
    let d = cfg.kernel.distance(x_now, &record.query_point)?;
    let eta = l_f * d.max(0.0).sqrt() + cfg.beta * record.std;
    if !eta.is_finite() {
        return Err(CoreError::NonFinite { context: "delayed error bound".to_string() });
    }
    Ok(eta)
}

/// Re-evaluate all candidate records at `x_now`, discard those with
/// η ≥ βσ_f, and keep at most 𝔍̄ records, preferring the smallest η.
///
/// Keeping smallest-η records minimizes the fused bound: ω(t) decreases in
/// every retained (η⁻² − (βσ_f)⁻²) term. Duplicate (node, iteration) pairs
/// resolve to the most recently received copy. The result may be empty, in
/// which case aggregation falls back to the prior.
pub fn manage_information_set(
    iset: &InformationSet,
    incoming: &[PredictionRecord],
    x_now: &[f64],
    cfg: &GPConfig,
    l_f: f64,
) -> Result<InformationSet> {
    let bound = cfg.beta_sigma_f();

    let mut candidates: Vec<PredictionRecord> =
        iset.records.iter().chain(incoming.iter()).cloned().collect();
    // Later entries win on (node, iteration) collisions; incoming follows
    // existing, so a redelivery replaces the stored copy.
    candidates.sort_by(|a, b| {
        (a.node_id, a.iteration)
            .cmp(&(b.node_id, b.iteration))
            .then(a.received_at.total_cmp(&b.received_at))
    });
    candidates.dedup_by(|next, prev| {
        if (next.node_id, next.iteration) == (prev.node_id, prev.iteration) {
            std::mem::swap(prev, next);
            true
        } else {
            false
        }
    });

    let mut scored: Vec<(f64, PredictionRecord)> = Vec::with_capacity(candidates.len());
    for rec in candidates {
        let eta = delayed_error_bound(&rec, x_now, cfg, l_f)?;
        if eta < bound {
            scored.push((eta, rec));
        }
    }
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| (a.1.node_id, a.1.iteration).cmp(&(b.1.node_id, b.1.iteration)))
    });
    scored.truncate(iset.capacity);

    // Stable presentation order: by node then iteration.
    let mut records: Vec<PredictionRecord> = scored.into_iter().map(|(_, r)| r).collect();
    records.sort_by_key(|r| (r.node_id, r.iteration));

    Ok(InformationSet { records, capacity: iset.capacity })
}

/// How record responsibilities ρ_k^i(t) are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResponsibilityRule {
    /// ρ_k^i = min(1, ln(βσ_f / η_i^k)) / 𝔍̄.
    ///
    /// Log-ratio confidence in the style of rBCM's entropy weights, assigned
    /// per record so that Σρ ≤ n/𝔍̄ ≤ 1 holds structurally, ρ_k^i → 0 as
    /// η_i^k → βσ_f, and adding a record never increases ω(t) (existing
    /// responsibilities are untouched and the new term is nonnegative).
    #[default]
    LogRatio,
    /// ρ_k^i = 1 / n over the n retained records (sensitivity switch; the
    /// monotone-improvement property does not hold under this rule because an
    /// added record dilutes existing responsibilities).
    Uniform,
}

/// Weight attributed to one record: (node id, iteration, ω_k^i).
pub type WeightEntry = (u32, u64, f64);

/// Output of an aggregation pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationResult {
    /// Fused prediction f̂(x(t)).
    pub fused_mean: f64,
    /// Per-record weights ω_k^i(t).
    pub weights: Vec<WeightEntry>,
    /// Prior-mean weight ω_m(t).
    pub prior_weight: f64,
    /// Total responsibility ρ(t) (for BCM this is the §V.B record count).
    pub rho: f64,
    /// Deterministic error bound ω(t); `None` for the baseline aggregators,
    /// which claim no bound.
    pub omega: Option<f64>,
    /// The per-record delayed error bounds η_i^k(t), aligned with `weights`.
    pub etas: Vec<f64>,
}

impl AggregationResult {
    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line)
            .map_err(|e| CoreError::invalid("aggregation result", line.trim(), &format!("invalid JSON: {e}")))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("aggregation result serialization cannot fail")
    }
}

/// The deterministic fused error bound ω(t) of an AsyncDGP result.
pub fn aggregate_error_bound(result: &AggregationResult) -> Result<f64> {
    result.omega.ok_or(CoreError::BoundNotApplicable)
}

/// Fuse a managed information set at `x_now` with the delayed-confidence
/// weights and return the fused mean together with its bound ω(t).
///
/// Every record must satisfy η_i^k(t) < βσ_f (i.e. the set was managed at
/// this same `x_now`); otherwise an [`CoreError::UnmanagedRecord`] contract
/// error is returned. An empty set yields the prior: f̂ = m(x), ω = βσ_f,
/// ω_m = 1.
pub fn asyncdgp_aggregate(
    iset: &InformationSet,
    x_now: &[f64],
    cfg: &GPConfig,
    l_f: f64,
    rule: ResponsibilityRule,
) -> Result<AggregationResult> {
    let bound = cfg.beta_sigma_f();
    let prior_mean = cfg.prior_mean_const;

    if iset.is_empty() {
        return Ok(AggregationResult {
            fused_mean: prior_mean,
            weights: Vec::new(),
            prior_weight: 1.0,
            rho: 0.0,
            omega: Some(bound),
            etas: Vec::new(),
        });
    }

    let mut etas = Vec::with_capacity(iset.len());
    for rec in iset.records() {
        let eta = delayed_error_bound(rec, x_now, cfg, l_f)?;
        if eta >= bound {
            return Err(CoreError::UnmanagedRecord { eta, bound });
        }
        etas.push(eta);
    }

    // Exact records (η = 0, or small enough that η² underflows) pin the
    // function value; the η → 0 limit puts all weight on them and drives the
    // bound to zero.
    let exact: Vec<usize> =
        etas.iter().enumerate().filter(|(_, &e)| e * e == 0.0).map(|(i, _)| i).collect();
    if !exact.is_empty() {
        let w = 1.0 / exact.len() as f64;
        let mut weights = Vec::with_capacity(iset.len());
        let mut fused = 0.0;
        for (i, rec) in iset.records().iter().enumerate() {
            let wi = if exact.contains(&i) { w } else { 0.0 };
            fused += wi * rec.mean;
            weights.push((rec.node_id, rec.iteration, wi));
        }
        return Ok(AggregationResult {
            fused_mean: fused,
            weights,
            prior_weight: 0.0,
            rho: 1.0,
            omega: Some(0.0),
            etas,
        });
    }

    let rhos = responsibilities(&etas, bound, iset.capacity(), rule);
    let rho: f64 = rhos.iter().sum();

    let c2 = 1.0 / (bound * bound);
    let mut omega_inv_sq = c2;
    for (eta, r) in etas.iter().zip(&rhos) {
        omega_inv_sq += r * (1.0 / (eta * eta) - c2);
    }
    let omega_sq = 1.0 / omega_inv_sq;
    // omega <= beta*sigma_f holds exactly in real arithmetic; the clamp only
    // strips the last-ulp rounding of the sqrt/recip chain.
    let omega = omega_sq.sqrt().min(bound);

    let mut weights = Vec::with_capacity(iset.len());
    let mut fused = 0.0;
    for ((rec, eta), r) in iset.records().iter().zip(&etas).zip(&rhos) {
        let w = omega_sq * r / (eta * eta);
        fused += w * rec.mean;
        weights.push((rec.node_id, rec.iteration, w));
    }
    let prior_weight = omega_sq * (1.0 - rho) * c2;
    fused += prior_weight * prior_mean;

    Ok(AggregationResult {
        fused_mean: fused,
        weights,
        prior_weight,
        rho,
        omega: Some(omega),
        etas,
    })
}

fn responsibilities(etas: &[f64], bound: f64, capacity: usize, rule: ResponsibilityRule) -> Vec<f64> {
    match rule {
        ResponsibilityRule::LogRatio => etas
            .iter()
            .map(|&eta| (bound / eta).ln().min(1.0) / capacity as f64)
            .collect(),
        ResponsibilityRule::Uniform => {
            let n = etas.len() as f64;
            vec![1.0 / n; etas.len()]
        }
    }
}

/// The five conventional aggregation strategies of the comparison study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorKind {
    AsyncDgp,
    Bcm,
    Rbcm,
    Poe,
    Gpoe,
    Moe,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 6] = [
        AggregatorKind::AsyncDgp,
        AggregatorKind::Bcm,
        AggregatorKind::Rbcm,
        AggregatorKind::Poe,
        AggregatorKind::Gpoe,
        AggregatorKind::Moe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AggregatorKind::AsyncDgp => "asyncdgp",
            AggregatorKind::Bcm => "bcm",
            AggregatorKind::Rbcm => "rbcm",
            AggregatorKind::Poe => "poe",
            AggregatorKind::Gpoe => "gpoe",
            AggregatorKind::Moe => "moe",
        }
    }

    /// Whether the weight system includes a prior-mean term.
    pub fn has_prior_term(&self) -> bool {
        matches!(self, AggregatorKind::AsyncDgp | AggregatorKind::Bcm | AggregatorKind::Rbcm)
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asyncdgp" | "async-dgp" | "async" => Ok(AggregatorKind::AsyncDgp),
            "bcm" => Ok(AggregatorKind::Bcm),
            "rbcm" => Ok(AggregatorKind::Rbcm),
            "poe" => Ok(AggregatorKind::Poe),
            "gpoe" => Ok(AggregatorKind::Gpoe),
            "moe" => Ok(AggregatorKind::Moe),
            other => Err(CoreError::invalid(
                "aggregator",
                other,
                "expected one of asyncdgp, bcm, rbcm, poe, gpoe, moe",
            )),
        }
    }
}

/// Evaluate one of the five baseline weight systems on a (managed)
/// information set.
///
/// The formulas are taken verbatim from the comparison setup: BCM and rBCM
/// include the prior-correction term (whose weight can be negative), POE and
/// gPOE normalize over records only, MOE is the arithmetic mean. No error
/// bound is claimed, so `omega` is left unpopulated. Zero-variance records
/// receive full weight, split equally.
pub fn baseline_aggregate(
    kind: AggregatorKind,
    iset: &InformationSet,
    _x_now: &[f64],
    cfg: &GPConfig,
) -> Result<AggregationResult> {
    if kind == AggregatorKind::AsyncDgp {
        return Err(CoreError::invalid(
            "kind",
            "asyncdgp",
            "use asyncdgp_aggregate for the bounded aggregator",
        ));
    }

    let recs = iset.records();
    let n = recs.len();
    let prior_mean = cfg.prior_mean_const;
    let sigma_f = cfg.kernel.sigma_f();
    let sf_inv2 = 1.0 / (sigma_f * sigma_f);

    if n == 0 {
        if kind.has_prior_term() {
            // BCM/rBCM degenerate to the prior: omega^{-2} = sigma_f^{-2}.
            return Ok(AggregationResult {
                fused_mean: prior_mean,
                weights: Vec::new(),
                prior_weight: 1.0,
                rho: 0.0,
                omega: None,
                etas: Vec::new(),
            });
        }
        return Err(CoreError::EmptyInformationSet { aggregator: kind.name() });
    }

    // Infinite-precision records: full weight split equally among them.
    if kind != AggregatorKind::Moe {
        let zero: Vec<usize> = recs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.std * r.std == 0.0)
            .map(|(i, _)| i)
            .collect();
        if !zero.is_empty() {
            let w = 1.0 / zero.len() as f64;
            let mut weights = Vec::with_capacity(n);
            let mut fused = 0.0;
            for (i, rec) in recs.iter().enumerate() {
                let wi = if zero.contains(&i) { w } else { 0.0 };
                fused += wi * rec.mean;
                weights.push((rec.node_id, rec.iteration, wi));
            }
            return Ok(AggregationResult {
                fused_mean: fused,
                weights,
                prior_weight: 0.0,
                rho: 1.0,
                omega: None,
                etas: Vec::new(),
            });
        }
    }

    let (per_record, rho, prior_coeff): (Vec<f64>, f64, f64) = match kind {
        AggregatorKind::Bcm => {
            // rho counts retained result sets; prior coefficient (1 - rho).
            let coeffs: Vec<f64> = recs.iter().map(|r| 1.0 / (r.std * r.std)).collect();
            let rho = n as f64;
            (coeffs, rho, 1.0 - rho)
        }
        AggregatorKind::Rbcm => {
            let rhos: Vec<f64> = recs.iter().map(|r| (sigma_f / r.std).ln()).collect();
            let rho: f64 = rhos.iter().sum();
            let coeffs: Vec<f64> =
                recs.iter().zip(&rhos).map(|(r, rk)| rk / (r.std * r.std)).collect();
            (coeffs, rho, 1.0 - rho)
        }
        AggregatorKind::Poe => {
            let coeffs: Vec<f64> = recs.iter().map(|r| 1.0 / (r.std * r.std)).collect();
            (coeffs, 0.0, 0.0)
        }
        AggregatorKind::Gpoe => {
            let rhos: Vec<f64> = recs.iter().map(|r| (sigma_f / r.std).ln()).collect();
            let rho: f64 = rhos.iter().sum();
            let coeffs: Vec<f64> =
                recs.iter().zip(&rhos).map(|(r, rk)| rk / (r.std * r.std)).collect();
            (coeffs, rho, 0.0)
        }
        AggregatorKind::Moe => {
            let w = 1.0 / n as f64;
            let fused = recs.iter().map(|r| r.mean).sum::<f64>() / n as f64;
            return Ok(AggregationResult {
                fused_mean: fused,
                weights: recs.iter().map(|r| (r.node_id, r.iteration, w)).collect(),
                prior_weight: 0.0,
                rho: 0.0,
                omega: None,
                etas: Vec::new(),
            });
        }
        AggregatorKind::AsyncDgp => unreachable!(),
    };

    let omega_inv_sq: f64 = per_record.iter().sum::<f64>() + prior_coeff * sf_inv2;
    if omega_inv_sq <= 0.0 || !omega_inv_sq.is_finite() {
        // gPOE with every expert at the prior (all rho_k = 0) normalizes
        // against zero; fall back to the arithmetic mean.
        if kind == AggregatorKind::Gpoe && per_record.iter().all(|&c| c == 0.0) {
            let w = 1.0 / n as f64;
            let fused = recs.iter().map(|r| r.mean).sum::<f64>() / n as f64;
            return Ok(AggregationResult {
                fused_mean: fused,
                weights: recs.iter().map(|r| (r.node_id, r.iteration, w)).collect(),
                prior_weight: 0.0,
                rho,
                omega: None,
                etas: Vec::new(),
            });
        }
        return Err(CoreError::NonFinite {
            context: format!("{} weight normalization (omega^-2 = {omega_inv_sq})", kind.name()),
        });
    }
    let omega_sq = 1.0 / omega_inv_sq;

    let mut weights = Vec::with_capacity(n);
    let mut fused = 0.0;
    for (rec, coeff) in recs.iter().zip(&per_record) {
        let w = omega_sq * coeff;
        fused += w * rec.mean;
        weights.push((rec.node_id, rec.iteration, w));
    }
    let prior_weight = if kind.has_prior_term() { omega_sq * prior_coeff * sf_inv2 } else { 0.0 };
    fused += prior_weight * prior_mean;

    Ok(AggregationResult {
        fused_mean: fused,
        weights,
        prior_weight,
        rho,
        omega: None,
        etas: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lipschitz::{f_lipschitz, lipschitz_closed_form};

    fn se_cfg() -> GPConfig {
        GPConfig::new(KernelSpec::se(1.0, 1.0, 1).unwrap(), 0.1, 2.0, 1.0, 8).unwrap()
    }

    fn l_f(cfg: &GPConfig) -> f64 {
        f_lipschitz(cfg.gamma, lipschitz_closed_form(&cfg.kernel)).unwrap()
    }

    fn record(node: u32, iter: u64, x: f64, mean: f64, std: f64, t: f64) -> PredictionRecord {
        PredictionRecord {
            node_id: node,
            iteration: iter,
            query_point: vec![x],
            mean,
            std,
            produced_at: t,
            received_at: t,
        }
    }

    #[test]
    fn eta_at_zero_distance_is_beta_sigma() {
        let cfg = se_cfg();
        let rec = record(0, 0, 0.5, 1.0, 0.3, 0.0);
        let eta = delayed_error_bound(&rec, &[0.5], &cfg, l_f(&cfg)).unwrap();
        assert!((eta - cfg.beta * 0.3).abs() < 1e-15);
    }

    #[test]
    fn eta_with_unit_distance_and_zero_std() {
        let cfg = se_cfg();
        let rec = record(0, 0, 0.0, 1.0, 0.0, 0.0);
        let eta = delayed_error_bound(&rec, &[1.0], &cfg, 1.0).unwrap();
        assert!((eta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_composition_example() {
        // SE sigma_f = sigma_l = 1, Gamma = 1, beta = 2, sigma_i = 0.3,
        // |dx| = 0.25: eta = sqrt(2 e^{-1/2}) * 0.5 + 0.6.
        let cfg = se_cfg();
        let lf = l_f(&cfg);
        assert!((lf - (2.0 * (-0.5f64).exp()).sqrt()).abs() < 1e-15);
        let rec = record(0, 0, 0.0, 1.0, 0.3, 0.0);
        let eta = delayed_error_bound(&rec, &[0.25], &cfg, lf).unwrap();
        let expect = lf * 0.25f64.sqrt() + 0.6;
        assert!((eta - expect).abs() < 1e-15);
        assert!((eta - 1.15066).abs() < 1e-4);
    }

    #[test]
    fn management_discards_everything_at_or_beyond_prior_bound() {
        let cfg = se_cfg();
        let lf = l_f(&cfg);
        let iset = InformationSet::new(4).unwrap();
        // std = sigma_f makes eta >= beta*sigma_f regardless of distance.
        let incoming: Vec<_> = (0..4).map(|i| record(i, 0, 0.0, 1.0, 1.0, 0.0)).collect();
        let managed = manage_information_set(&iset, &incoming, &[0.0], &cfg, lf).unwrap();
        assert!(managed.is_empty());
    }

    #[test]
    fn management_keeps_fresh_records_one_per_node() {
        let cfg = se_cfg();
        let lf = l_f(&cfg);
        let iset = InformationSet::new(4).unwrap();
        let incoming: Vec<_> = (0..4).map(|i| record(i, 5, 0.1, 1.0, 0.2, 1.0)).collect();
        let managed = manage_information_set(&iset, &incoming, &[0.1], &cfg, lf).unwrap();
        assert_eq!(managed.len(), 4);
        assert_eq!(managed.node_ids(), vec![0, 1, 2, 3]);
        for node in 0..4 {
            assert_eq!(managed.latest_iteration(node), Some(5));
        }
    }

    #[test]
    fn eviction_keeps_smallest_eta() {
        let cfg = se_cfg();
        let lf = l_f(&cfg);
        let iset = InformationSet::new(10).unwrap();
        // 12 valid candidates with distinct sigma: eta ordering = sigma ordering.
        let incoming: Vec<_> = (0..12)
            .map(|i| record(i % 4, (i / 4) as u64, 0.0, 1.0, 0.05 + 0.03 * i as f64, 0.0))
            .collect();
        let managed = manage_information_set(&iset, &incoming, &[0.0], &cfg, lf).unwrap();
        assert_eq!(managed.len(), 10);
        // The two largest-sigma records (i = 10, 11) must be gone.
        let mut stds: Vec<f64> = managed.records().iter().map(|r| r.std).collect();
        stds.sort_by(f64::total_cmp);
        assert!((stds.last().unwrap() - (0.05 + 0.03 * 9.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_set_aggregates_to_prior() {
        let cfg = se_cfg();
        let iset = InformationSet::new(4).unwrap();
        let res = asyncdgp_aggregate(&iset, &[0.0], &cfg, l_f(&cfg), ResponsibilityRule::LogRatio)
            .unwrap();
        assert_eq!(res.fused_mean, cfg.prior_mean_const);
        assert_eq!(res.prior_weight, 1.0);
        assert_eq!(res.omega, Some(cfg.beta_sigma_f()));
        assert_eq!(aggregate_error_bound(&res).unwrap(), cfg.beta_sigma_f());
    }

    #[test]
    fn two_record_worked_example() {
        // eta_1 = 0.5, eta_2 = 1.0, beta*sigma_f = 2, uniform rho = 0.5 each:
        // omega^{-2} = 0.5(4 - 0.25) + 0.5(1 - 0.25) + 0.25 = 2.5,
        // w_1 = 0.8, w_2 = 0.2, w_m = 0.
        let cfg = se_cfg();
        let lf = 1.0;
        // Zero distance so eta = beta * std: std 0.25 -> eta 0.5; std 0.5 -> eta 1.
        let mut iset = InformationSet::new(4).unwrap();
        let managed = manage_information_set(
            &iset,
            &[record(0, 0, 0.0, 3.0, 0.25, 0.0), record(1, 0, 0.0, -1.0, 0.5, 0.0)],
            &[0.0],
            &cfg,
            lf,
        )
        .unwrap();
        iset = managed;
        let res =
            asyncdgp_aggregate(&iset, &[0.0], &cfg, lf, ResponsibilityRule::Uniform).unwrap();
        assert!((res.omega.unwrap() - (2.5f64).powf(-0.5)).abs() < 1e-15);
        assert!((res.omega.unwrap() - 0.63246).abs() < 1e-5);
        let w: Vec<f64> = res.weights.iter().map(|w| w.2).collect();
        assert!((w[0] - 0.8).abs() < 1e-15);
        assert!((w[1] - 0.2).abs() < 1e-15);
        assert!(res.prior_weight.abs() < 1e-15);
        assert!((res.fused_mean - (0.8 * 3.0 + 0.2 * -1.0)).abs() < 1e-15);
        let total: f64 = w.iter().sum::<f64>() + res.prior_weight;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_approaches_prior_bound_for_weak_records() {
        let cfg = se_cfg();
        let bound = cfg.beta_sigma_f();
        for rule in [ResponsibilityRule::LogRatio, ResponsibilityRule::Uniform] {
            let mut iset = InformationSet::new(4).unwrap();
            // Single record with eta just below beta*sigma_f.
            iset = manage_information_set(
                &iset,
                &[record(0, 0, 0.0, 1.0, 0.999_999 * bound / cfg.beta, 0.0)],
                &[0.0],
                &cfg,
                1.0,
            )
            .unwrap();
            assert_eq!(iset.len(), 1);
            let res = asyncdgp_aggregate(&iset, &[0.0], &cfg, 1.0, rule).unwrap();
            let omega = res.omega.unwrap();
            assert!(omega <= bound);
            assert!(omega > 0.999 * bound, "{rule:?}: omega = {omega}");
        }
    }

    #[test]
    fn unmanaged_record_is_a_contract_violation() {
        let cfg = se_cfg();
        let mut iset = InformationSet::new(4).unwrap();
        iset.records.push(record(0, 0, 0.0, 1.0, 1.5, 0.0)); // eta = 3 > 2
        let err = asyncdgp_aggregate(&iset, &[0.0], &cfg, 1.0, ResponsibilityRule::LogRatio);
        assert!(matches!(err, Err(CoreError::UnmanagedRecord { .. })));
    }

    #[test]
    fn monotone_improvement_under_log_ratio() {
        let cfg = se_cfg();
        let lf = 1.0;
        let x = [0.0];
        let base = vec![
            record(0, 0, 0.0, 1.0, 0.25, 0.0),
            record(1, 0, 0.1, 0.5, 0.4, 0.0),
        ];
        let iset = InformationSet::new(8).unwrap();
        let managed = manage_information_set(&iset, &base, &x, &cfg, lf).unwrap();
        let before = asyncdgp_aggregate(&managed, &x, &cfg, lf, ResponsibilityRule::LogRatio)
            .unwrap()
            .omega
            .unwrap();
        let extended =
            manage_information_set(&managed, &[record(2, 0, 0.2, 0.9, 0.45, 0.0)], &x, &cfg, lf)
                .unwrap();
        assert_eq!(extended.len(), 3);
        let after = asyncdgp_aggregate(&extended, &x, &cfg, lf, ResponsibilityRule::LogRatio)
            .unwrap()
            .omega
            .unwrap();
        assert!(after <= before + 1e-15, "{after} > {before}");
    }

    #[test]
    fn moe_is_arithmetic_mean() {
        let cfg = se_cfg();
        let mut iset = InformationSet::new(4).unwrap();
        for (i, m) in [1.0, 2.0, 3.0].iter().enumerate() {
            iset.records.push(record(i as u32, 0, 0.0, *m, 0.3, 0.0));
        }
        let res = baseline_aggregate(AggregatorKind::Moe, &iset, &[0.0], &cfg).unwrap();
        assert_eq!(res.fused_mean, 2.0);
    }

    #[test]
    fn poe_equal_sigma_gives_equal_weights() {
        let cfg = se_cfg();
        let mut iset = InformationSet::new(4).unwrap();
        iset.records.push(record(0, 0, 0.0, 1.0, 0.4, 0.0));
        iset.records.push(record(1, 0, 0.0, 3.0, 0.4, 0.0));
        let res = baseline_aggregate(AggregatorKind::Poe, &iset, &[0.0], &cfg).unwrap();
        assert!((res.weights[0].2 - 0.5).abs() < 1e-15);
        assert!((res.weights[1].2 - 0.5).abs() < 1e-15);
        assert!((res.fused_mean - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bcm_single_prior_variance_record_returns_its_mean() {
        let cfg = se_cfg();
        let mut iset = InformationSet::new(4).unwrap();
        iset.records.push(record(0, 0, 0.0, 1.7, 1.0, 0.0)); // sigma_i = sigma_f
        let res = baseline_aggregate(AggregatorKind::Bcm, &iset, &[0.0], &cfg).unwrap();
        assert_eq!(res.rho, 1.0);
        assert!((res.weights[0].2 - 1.0).abs() < 1e-15);
        assert!(res.prior_weight.abs() < 1e-15);
        assert!((res.fused_mean - 1.7).abs() < 1e-15);
        assert!(aggregate_error_bound(&res).is_err());
    }

    #[test]
    fn poe_requires_records() {
        let cfg = se_cfg();
        let iset = InformationSet::new(4).unwrap();
        for kind in [AggregatorKind::Poe, AggregatorKind::Gpoe, AggregatorKind::Moe] {
            assert!(matches!(
                baseline_aggregate(kind, &iset, &[0.0], &cfg),
                Err(CoreError::EmptyInformationSet { .. })
            ));
        }
        for kind in [AggregatorKind::Bcm, AggregatorKind::Rbcm] {
            let res = baseline_aggregate(kind, &iset, &[0.0], &cfg).unwrap();
            assert_eq!(res.prior_weight, 1.0);
        }
    }

    #[test]
    fn zero_variance_record_takes_all_weight() {
        let cfg = se_cfg();
        let mut iset = InformationSet::new(4).unwrap();
        iset.records.push(record(0, 0, 0.0, 5.0, 0.0, 0.0));
        iset.records.push(record(1, 0, 0.0, 1.0, 0.5, 0.0));
        for kind in [AggregatorKind::Bcm, AggregatorKind::Rbcm, AggregatorKind::Poe, AggregatorKind::Gpoe] {
            let res = baseline_aggregate(kind, &iset, &[0.0], &cfg).unwrap();
            assert_eq!(res.fused_mean, 5.0, "{kind:?}");
            assert_eq!(res.weights[0].2, 1.0);
            assert_eq!(res.weights[1].2, 0.0);
        }
    }

    #[test]
    fn record_jsonl_round_trip() {
        let rec = record(3, 7, 0.25, -1.5, 0.3, 12.5);
        let line = rec.to_json_line();
        let back = PredictionRecord::from_json_line(&line).unwrap();
        assert_eq!(rec, back);
        assert!(PredictionRecord::from_json_line("{not json").is_err());
        // received_at < produced_at violates the record invariant.
        let bad = r#"{"node_id":0,"iteration":0,"query_point":[0.0],"mean":0.0,"std":0.1,"produced_at":2.0,"received_at":1.0}"#;
        assert!(PredictionRecord::from_json_line(bad).is_err());
    }
}
