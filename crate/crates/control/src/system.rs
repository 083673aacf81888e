//! The closed-loop error system and its spectral tracking bound.
//!
//! Feedback linearization with gains (g_0 .. g_{n-1}) leaves the tracking
//! error e = x − x_d with linear dynamics
//!
//! ```text
//! ė(t) = A e(t) + b (f(x(t)) − f̂(x(t)))
//! ```
//!
//! where A is the companion matrix with last row −gains and b = e_n. With
//! A = QΛQ⁻¹ diagonalizable and Hurwitz, ‖exp(At)‖ ≤ ‖Q‖‖Q⁻¹‖ e^(Λ̄t) for
//! Λ̄ = max Re(λ), and the variation-of-constants solution yields
//!
//! ```text
//! ‖e(t)‖ ≤ ‖Q‖‖Q⁻¹‖ ( e^(Λ̄Δt) ‖e(t₀)‖ + (1 − e^(Λ̄Δt)) ω̄ / |Λ̄| )
//! ```
//!
//! whenever |f − f̂| ≤ ω(τ) ≤ ω̄ along the trajectory. The t → ∞ limit is the
//! ultimate bound ‖Q‖‖Q⁻¹‖ ω̄/|Λ̄|.
//!
//! A companion matrix is diagonalizable exactly when its eigenvalues are
//! distinct, in which case the eigenvector matrix is the Vandermonde matrix
//! of the eigenvalues — used here instead of a numerical eigenvector solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{ControlError, Result};

const RESIDUAL_TOL: f64 = 1e-8;

/// Eigenstructure of the Hurwitz closed-loop error matrix.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    /// Companion-form error matrix.
    pub a: DMatrix<f64>,
    /// Input direction (0, …, 0, 1)ᵀ.
    pub b: DVector<f64>,
    /// Vandermonde eigenvector matrix.
    pub q: DMatrix<Complex<f64>>,
    /// Eigenvalues of `a`.
    pub lambda: Vec<Complex<f64>>,
    /// Λ̄ = max real part (< 0).
    pub lambda_bar: f64,
    /// Spectral condition factor ‖Q‖₂‖Q⁻¹‖₂.
    pub cond_q: f64,
    /// Feedback gains the system was built from.
    pub gains: Vec<f64>,
}

/// Build the companion error system for feedback gains (g_0 .. g_{n-1}) and
/// verify it is Hurwitz and diagonalizable.
pub fn build_error_system(gains: &[f64]) -> Result<ErrorSystem> {
    let n = gains.len();
    if n == 0 {
        return Err(ControlError::Validation("need at least one gain".into()));
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(ControlError::Validation("gains must be finite".into()));
    }

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -gains[j];
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let lambda: Vec<Complex<f64>> = a.clone().complex_eigenvalues().iter().copied().collect();

    for eig in &lambda {
        if eig.re >= 0.0 {
            return Err(ControlError::NotHurwitz { eigenvalue: format!("{eig}") });
        }
    }

    // Companion matrices are diagonalizable iff all eigenvalues are distinct.
    let scale = lambda.iter().map(|l| l.norm()).fold(1.0f64, f64::max);
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_gap = min_gap.min((lambda[i] - lambda[j]).norm());
        }
    }
    if n > 1 && min_gap < 1e-8 * scale {
        return Err(ControlError::Defective { gap: min_gap });
    }

    // Vandermonde eigenvectors: v_j = (1, λ_j, λ_j², …)ᵀ.
    let mut q = DMatrix::<Complex<f64>>::zeros(n, n);
    for j in 0..n {
        let mut p = Complex::new(1.0, 0.0);
        for i in 0..n {
            q[(i, j)] = p;
            p *= lambda[j];
        }
    }

    let a_c = a.map(|v| Complex::new(v, 0.0));
    let mut aq_minus_qd = &a_c * &q;
    for j in 0..n {
        for i in 0..n {
            aq_minus_qd[(i, j)] -= q[(i, j)] * lambda[j];
        }
    }
    let residual = aq_minus_qd.norm();
    let tolerance = RESIDUAL_TOL * a.norm().max(1.0);
    if residual > tolerance {
        return Err(ControlError::EigenResidual { residual, tolerance });
    }

    let q_inv = q.clone().try_inverse().ok_or(ControlError::Defective { gap: min_gap })?;
    let cond_q = spectral_norm(&q) * spectral_norm(&q_inv);
    let lambda_bar = lambda.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);

    Ok(ErrorSystem { a, b, q, lambda, lambda_bar, cond_q, gains: gains.to_vec() })
}

fn spectral_norm(m: &DMatrix<Complex<f64>>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// The spectral tracking bound at elapsed time `dt` from t₀:
/// condQ·(e^(Λ̄·dt)·‖e(t₀)‖ + (1 − e^(Λ̄·dt))·ω̄/|Λ̄|).
pub fn tracking_bound(sys: &ErrorSystem, e0_norm: f64, omega_bar: f64, dt: f64) -> f64 {
    let decay = (sys.lambda_bar * dt).exp();
    sys.cond_q * (decay * e0_norm + (1.0 - decay) * omega_bar / sys.lambda_bar.abs())
}

/// lim_{t→∞} of [`tracking_bound`]: condQ·ω̄/|Λ̄|.
pub fn ultimate_bound(sys: &ErrorSystem, omega_bar: f64) -> f64 {
    sys.cond_q * omega_bar / sys.lambda_bar.abs()
}
