//! Feedback-linearization tracking simulation with per-step bound checking.
//!
//! Plant: chain of integrators with unknown drift, ẋ_i = x_{i+1},
//! ẋ_n = f(x) + u. Controller: u = −f̂(x) + x_d⁽ⁿ⁾(t) − gainsᵀe(t) with
//! e_j = x_j − x_d⁽ʲ⁻¹⁾, which leaves ė = Ae + b(f − f̂).
//!
//! The prediction feed refreshes at the broadcast interval and is held
//! between ticks. The logged bound series extends each tick's fused bound
//! ω_k to intermediate states by the same Lipschitz argument that produced
//! the delayed error bounds:
//!
//! ```text
//! |f(x(t)) − f̂_k| ≤ |f(x(t)) − f(x(t_k))| + |f(x(t_k)) − f̂_k|
//!                 ≤ L_f √d(x(t), x(t_k)) + ω_k  =: ω(t)
//! ```
//!
//! so the premise |f − f̂| ≤ ω(t) of the tracking bound holds at every step,
//! not just at tick times. ω̄ is the maximum logged ω(t) from the bound
//! anchor t₀ (the first tick with a non-empty information set) onward.

use serde::{Deserialize, Serialize};

use crate::error::{ControlError, Result};
use crate::feed::ExpertPool;
use crate::system::{tracking_bound, ErrorSystem};

/// Sinusoidal reference x_d(t) = a · sin(2πt/T), with analytic derivatives
/// a·(2π/T)^k · sin(2πt/T + kπ/2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SineReference {
    pub amplitude: f64,
    pub period: f64,
}

impl SineReference {
    pub fn derivative(&self, order: u32, t: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period;
        self.amplitude
            * w.powi(order as i32)
            * (w * t + order as f64 * std::f64::consts::FRAC_PI_2).sin()
    }
}

/// Where f̂ comes from.
pub enum Feed {
    /// f̂ = f exactly; ω ≡ 0 (nominal scenario for order checks).
    Perfect,
    /// f̂ = f + c; ω ≡ |c|.
    Offset(f64),
    /// Delayed expert pool aggregation.
    Live(ExpertPool),
}

/// One simulated run with aligned per-step logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingRun {
    pub times: Vec<f64>,
    /// Plant state x(t) per step.
    pub states: Vec<Vec<f64>>,
    /// Reference vector (x_d, x_d', …) per step.
    pub references: Vec<Vec<f64>>,
    /// Tracking error components per step.
    pub errors: Vec<Vec<f64>>,
    pub error_norms: Vec<f64>,
    /// |f(x(t)) − f̂(t)| per step.
    pub pred_errors: Vec<f64>,
    /// Valid per-step bound ω(t) on the prediction error.
    pub omegas: Vec<f64>,
    /// tracking_bound(sys, ‖e(t₀)‖, ω̄, t − t₀) per step (NaN before t₀).
    pub bounds: Vec<f64>,
    /// max ω(t) over t ≥ t₀.
    pub omega_bar: f64,
    /// Bound anchor: first tick time with a non-empty information set (0 for
    /// perfect/offset feeds).
    pub t0: f64,
    pub e0_norm: f64,
    /// |f − f̂| ≤ ω(t) held at every logged step.
    pub premise_ok: bool,
    /// ‖e(t)‖ ≤ bound(t) · (1 + tolerance) for every step past t₀.
    pub bound_ok: bool,
    pub bound_tolerance: f64,
}

impl TrackingRun {
    /// Largest ‖e(t)‖ over the final quarter of the horizon.
    pub fn final_quarter_sup(&self) -> f64 {
        let n = self.times.len();
        self.error_norms[(3 * n) / 4..].iter().copied().fold(0.0, f64::max)
    }
}

pub struct TrackingConfig {
    pub duration_s: f64,
    pub step_s: f64,
    pub broadcast_interval_s: f64,
    pub reference: SineReference,
    pub x0: Vec<f64>,
    /// Relative slack for the per-step bound check (RK4 and roundoff).
    pub bound_tolerance: f64,
}

impl TrackingConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.x0.len() != n {
            return Err(ControlError::Validation(format!(
                "x0 has {} components, system order is {n}",
                self.x0.len()
            )));
        }
        if !(self.step_s > 0.0 && self.step_s <= 0.02) {
            return Err(ControlError::Validation("step must be in (0, 0.02]".into()));
        }
        if self.duration_s <= 0.0 {
            return Err(ControlError::Validation("duration must be > 0".into()));
        }
        let ratio = self.broadcast_interval_s / self.step_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(ControlError::Validation(
                "broadcast interval must be a whole number of RK4 steps".into(),
            ));
        }
        Ok(())
    }
}

/// Integrate the closed loop with RK4 and a zero-order-hold prediction feed.
pub fn simulate_tracking(
    f: &dyn Fn(&[f64]) -> f64,
    sys: &ErrorSystem,
    cfg: &TrackingConfig,
    feed: &mut Feed,
) -> Result<TrackingRun> {
    let n = sys.gains.len();
    cfg.validate(n)?;

    let steps_per_tick = (cfg.broadcast_interval_s / cfg.step_s).round() as usize;
    let n_steps = (cfg.duration_s / cfg.step_s).round() as usize;
    let h = cfg.step_s;

    let mut x = cfg.x0.clone();
    // Live feeds hold the fused prediction between ticks; analytic feeds
    // (perfect/offset) cancel f continuously so the error dynamics stay
    // exactly linear.
    let mut held_f_hat = 0.0;
    let analytic_offset = match feed {
        Feed::Perfect => Some(0.0),
        Feed::Offset(c) => Some(*c),
        Feed::Live(_) => None,
    };
    let mut tick_omega = f64::NAN;
    let mut tick_query: Vec<f64> = Vec::new();
    let mut t0: Option<f64> = None;

    let mut times: Vec<f64> = Vec::with_capacity(n_steps + 1);
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut references: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut errors: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut error_norms: Vec<f64> = Vec::with_capacity(n_steps + 1);
    let mut pred_errors: Vec<f64> = Vec::with_capacity(n_steps + 1);
    let mut omegas: Vec<f64> = Vec::with_capacity(n_steps + 1);

    for step in 0..=n_steps {
        let t = step as f64 * h;

        if step % steps_per_tick == 0 {
            match feed {
                Feed::Perfect => {
                    tick_omega = 0.0;
                    if t0.is_none() {
                        t0 = Some(t);
                    }
                }
                Feed::Offset(c) => {
                    tick_omega = c.abs();
                    if t0.is_none() {
                        t0 = Some(t);
                    }
                }
                Feed::Live(pool) => {
                    let result = pool.tick(t, &x)?;
                    held_f_hat = result.fused_mean;
                    tick_omega = result.omega.expect("asyncdgp always carries a bound");
                    if t0.is_none() && !result.weights.is_empty() {
                        t0 = Some(t);
                    }
                }
            }
            tick_query = x.clone();
        }

        // Per-step valid bound: extend the tick bound by the drift term.
        let omega_t = match feed {
            Feed::Live(pool) => {
                let d = pool
                    .gp_config()
                    .kernel
                    .distance(&x, &tick_query)
                    .map_err(ControlError::Core)?;
                tick_omega + pool.l_f() * d.max(0.0).sqrt()
            }
            _ => tick_omega,
        };

        let x_d: Vec<f64> = (0..n).map(|j| cfg.reference.derivative(j as u32, t)).collect();
        let e: Vec<f64> = (0..n).map(|j| x[j] - x_d[j]).collect();
        let e_norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !e_norm.is_finite() {
            return Err(ControlError::Diverged { t });
        }

        let f_hat_here = match analytic_offset {
            Some(c) => f(&x) + c,
            None => held_f_hat,
        };
        times.push(t);
        states.push(x.clone());
        references.push(x_d);
        pred_errors.push((f(&x) - f_hat_here).abs());
        omegas.push(omega_t);
        errors.push(e);
        error_norms.push(e_norm);

        if step == n_steps {
            break;
        }

        // RK4 on the true plant; analytic feeds re-evaluate f̂ at the
        // substep state, live feeds keep the tick value.
        let deriv = |t: f64, x: &[f64]| -> Vec<f64> {
            let mut dx = vec![0.0; n];
            for j in 0..n - 1 {
                dx[j] = x[j + 1];
            }
            let f_hat = match analytic_offset {
                Some(c) => f(x) + c,
                None => held_f_hat,
            };
            let u = -f_hat + cfg.reference.derivative(n as u32, t)
                - sys
                    .gains
                    .iter()
                    .enumerate()
                    .map(|(j, g)| g * (x[j] - cfg.reference.derivative(j as u32, t)))
                    .sum::<f64>();
            dx[n - 1] = f(x) + u;
            dx
        };
        let k1 = deriv(t, &x);
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = deriv(t + 0.5 * h, &x2);
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = deriv(t + 0.5 * h, &x3);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = deriv(t + h, &x4);
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }

    let t0 = t0.unwrap_or(0.0);
    let anchor = times.iter().position(|&t| t >= t0 - 1e-12).unwrap_or(0);
    let e0_norm = error_norms[anchor];
    let omega_bar =
        omegas[anchor..].iter().copied().fold(0.0f64, f64::max);

    let bounds: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i < anchor {
                f64::NAN
            } else {
                tracking_bound(sys, e0_norm, omega_bar, t - t0)
            }
        })
        .collect();

    let premise_ok = pred_errors
        .iter()
        .zip(&omegas)
        .all(|(err, om)| *err <= om * (1.0 + 1e-9) + 1e-12);
    let tol = cfg.bound_tolerance;
    let bound_ok = (anchor..times.len())
        .all(|i| error_norms[i] <= bounds[i] * (1.0 + tol) + 1e-9);

    Ok(TrackingRun {
        times,
        states,
        references,
        errors,
        error_norms,
        pred_errors,
        omegas,
        bounds,
        omega_bar,
        t0,
        e0_norm,
        premise_ok,
        bound_ok,
        bound_tolerance: tol,
    })
}
