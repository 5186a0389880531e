//! Rank-based Monte-Carlo estimator of the volume loss.
//!
//! For a population `x_1..x_n` drawn as `x_i = mu + sqrt(Sigma) z_i`, each
//! sample's loss is estimated as
//!
//! ```text
//! Lhat(x_i) = sqrt((2 pi)^d det Sigma) / n * sum_{j: f(x_j) <= f(x_i)} exp(|z_j|^2 / 2)
//! ```
//!
//! which depends on the objective only through the comparisons
//! `f(x_j) <= f(x_i)`. The sum is evaluated in the log domain because
//! `exp(|z|^2 / 2)` overflows doubles near `|z| ~ 38`, and in `O(n log n)` by
//! sorting on `f` and prefix-combining the exponent terms. Tied objective
//! values include each other, so every member of a tie group shares the
//! group-closing prefix sum.

use super::NgdError;
use crate::matrix::{sym_eigen, SpdMatrix};
use nalgebra::DVector;

/// Per-sample loss estimates, kept both in the natural and the log domain.
#[derive(Debug, Clone)]
pub struct LossEstimates {
    values: Vec<f64>,
    log_values: Vec<f64>,
}

impl LossEstimates {
    /// Builds estimates directly from log-domain values (test hook and
    /// internal constructor).
    pub fn from_log_values(log_values: Vec<f64>) -> Self {
        let values = log_values.iter().map(|&l| l.exp()).collect();
        Self { values, log_values }
    }

    /// Builds estimates from plain loss values.
    pub fn from_values(values: Vec<f64>) -> Self {
        let log_values = values.iter().map(|&v| v.ln()).collect();
        Self { values, log_values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Lhat(x_i)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ln Lhat(x_i)`.
    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Recombination weights `Lhat(x_i)^(2/d)`, materialized as
    /// `exp((2/d) ln Lhat)`.
    pub fn weights(&self, dim: usize) -> Vec<f64> {
        let exponent = 2.0 / dim as f64;
        self.log_values
            .iter()
            .map(|&l| {
                if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    (exponent * l).exp()
                }
            })
            .collect()
    }
}

/// Estimates the loss of every population member from the objective values
/// and the standardized draws that generated them.
///
/// `f_values` may contain `+inf` (used to rank degenerate candidates worst)
/// but not NaN.
pub fn estimate_loss(
    f_values: &[f64],
    z: &[DVector<f64>],
    sigma: &SpdMatrix,
) -> Result<LossEstimates, NgdError> {
    let n = f_values.len();
    if n == 0 {
        return Err(NgdError::EmptyPopulation);
    }
    assert_eq!(n, z.len(), "one standardized draw per objective value");
    assert!(
        f_values.iter().all(|f| !f.is_nan()),
        "objective values must be NaN-free (map failures to +inf first)"
    );
    let d = sigma.dim();

    // ln( sqrt((2 pi)^d det Sigma) / n )
    let (eigenvalues, _) = sym_eigen(sigma.as_matrix())?;
    let log_det: f64 = eigenvalues.iter().map(|v| v.ln()).sum();
    let log_norm = 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det)
        - (n as f64).ln();

    // Sort by objective value; total_cmp gives a deterministic total order
    // and the stable sort keeps tied entries in index order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f_values[a].total_cmp(&f_values[b]));

    let mut log_values = vec![0.0; n];
    let mut running = f64::NEG_INFINITY;
    let mut group_start = 0;
    while group_start < n {
        let mut group_end = group_start;
        // Ties compared with `==` so that e.g. -0.0 and 0.0 fall in one group.
        while group_end + 1 < n
            && f_values[order[group_end + 1]] == f_values[order[group_start]]
        {
            group_end += 1;
        }
        for &idx in &order[group_start..=group_end] {
            running = log_add_exp(running, 0.5 * z[idx].norm_squared());
        }
        for &idx in &order[group_start..=group_end] {
            log_values[idx] = log_norm + running;
        }
        group_start = group_end + 1;
    }

    Ok(LossEstimates::from_log_values(log_values))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
