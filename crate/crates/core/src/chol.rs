//! Growable/shrinkable Cholesky factor for the capped training buffer.
//!
//! The factor tracks K + σ_n²I for a FIFO buffer, so the two structural
//! operations are appending a row/column at the end (bordering) and removing
//! the first row/column (sub-block plus rank-1 update). Both are O(n²),
//! against O(n³) for refactorization.

use crate::error::{CoreError, Result};

/// Lower-triangular Cholesky factor, stored as ragged rows
/// (`rows[i]` has `i + 1` entries).
#[derive(Debug, Clone, Default)]
pub struct CholeskyFactor {
    rows: Vec<Vec<f64>>,
}

impl CholeskyFactor {
    pub fn empty() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Append one row/column: `col` holds K[new, j] for existing j plus the
    /// new diagonal entry (including noise) as `diag`.
    pub fn append(&mut self, col: &[f64], diag: f64) -> Result<()> {
        let n = self.len();
        debug_assert_eq!(col.len(), n);
        let mut new_row = vec![0.0; n + 1];
        // Forward substitution: L[0..n,0..n] * c = col.
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= self.rows[i][k] * new_row[k];
            }
            new_row[i] = s / self.rows[i][i];
        }
        let mut d2 = diag;
        for k in 0..n {
            d2 -= new_row[k] * new_row[k];
        }
        if !(d2.is_finite() && d2 > 0.0) {
            return Err(CoreError::CholeskyFailure { max_jitter: 0.0 });
        }
        new_row[n] = d2.sqrt();
        self.rows.push(new_row);
        Ok(())
    }

    /// Remove the first row/column of the factored matrix.
    ///
    /// With K = [[a, bᵀ], [b, K₁]] and L = [[√a, 0], [ℓ, L₁]], the factor of
    /// K₁ is the rank-1 *update* of L₁ by ℓ = b/√a, since L₁L₁ᵀ = K₁ − ℓℓᵀ.
    pub fn drop_first(&mut self) {
        if self.rows.is_empty() {
            return;
        }
        let n = self.len();
        let mut v = Vec::with_capacity(n - 1);
        for i in 1..n {
            v.push(self.rows[i][0]);
        }
        let mut rows = Vec::with_capacity(n - 1);
        for i in 1..n {
            rows.push(self.rows[i][1..].to_vec());
        }
        self.rows = rows;
        self.rank_one_update(&mut v);
    }

    /// In-place update so that the factored matrix gains + vvᵀ.
    fn rank_one_update(&mut self, v: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(v.len(), n);
        for k in 0..n {
            let lkk = self.rows[k][k];
            let r = lkk.hypot(v[k]);
            let c = r / lkk;
            let s = v[k] / lkk;
            self.rows[k][k] = r;
            for i in (k + 1)..n {
                let lik = (self.rows[i][k] + s * v[i]) / c;
                v[i] = c * v[i] - s * lik;
                self.rows[i][k] = lik;
            }
        }
    }

    /// Solve L z = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(b.len(), n);
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.rows[i][k] * z[k];
            }
            z[i] = s / self.rows[i][i];
        }
        z
    }

    /// Solve Lᵀ x = z.
    pub fn solve_upper(&self, z: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(z.len(), n);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.rows[k][i] * x[k];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// Solve (LLᵀ) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }
}
