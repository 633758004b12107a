//! Lipschitz and sample-count error bounds for the shallow ReLU network.
//!
//! The network is piecewise affine: inside a region with a fixed activation
//! pattern its Jacobian is `W2 * diag(mask) * W1`. Summing absolute weight
//! products over all units bounds the induced infinity norm of every such
//! Jacobian, and `sqrt(3)` times that norm bounds the Euclidean Lipschitz
//! constant over the three inputs.
//!
//! The sample-count estimate replaces every `|dq_k/dx_i|` by the mean absolute
//! output weight `w_bar`, so `||J||_inf <= 3 w_bar` and, with the grid
//! half-spacing `1 / (2 (cbrt(n) - 1))`,
//!
//! ```text
//! e <= (27 w_bar^2 + 1) / (4 (cbrt(n) - 1)^2)
//! ```
//!
//! That estimate ignores the input-layer weights; it is kept because it is
//! what the tabulated estimates are computed from. Use [`lipschitz_gamma`]
//! when a sound bound is needed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::neuralnet::NetworkParams;
use crate::sampler::{exact_cube_root, half_spacing_normalized};

/// Weights outside `[-WEIGHT_RANGE, WEIGHT_RANGE]` trigger a diagnostic.
pub const WEIGHT_RANGE: f64 = 5.0;

pub type Matrix3 = [[f64; 3]; 3];

/// `J[k][i] = d q_k / d x_i` at a normalized input.
pub fn jacobian_at(p: &NetworkParams, x: &[f64; 3]) -> Matrix3 {
    let mask = p.activation_mask(x);
    let mut jac = [[0.0; 3]; 3];
    for (k, row) in jac.iter_mut().enumerate() {
        let w2 = p.w2_row(k);
        for j in (0..p.hidden()).filter(|&j| mask[j]) {
            let w1 = p.w1_row(j);
            for i in 0..3 {
                row[i] += w2[j] * w1[i];
            }
        }
    }
    jac
}

/// Induced infinity norm (max absolute row sum).
pub fn inf_norm(m: &Matrix3) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Upper bound on `||J(x)||_inf` valid for every input, taking all units as active.
pub fn jacobian_inf_norm_bound(p: &NetworkParams) -> f64 {
    (0..3)
        .map(|k| {
            let w2 = p.w2_row(k);
            (0..p.hidden())
                .map(|j| w2[j].abs() * p.w1_row(j).iter().map(|w| w.abs()).sum::<f64>())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn lipschitz_gamma(p: &NetworkParams) -> f64 {
    3f64.sqrt() * jacobian_inf_norm_bound(p)
}

pub fn mean_abs_output_weight(p: &NetworkParams) -> f64 {
    let w2 = p.w2();
    w2.iter().map(|w| w.abs()).sum::<f64>() / w2.len() as f64
}

pub fn max_abs_weight(p: &NetworkParams) -> f64 {
    p.w1()
        .iter()
        .chain(p.w2())
        .map(|w| w.abs())
        .fold(0.0, f64::max)
}

/// Error bound at a point `delta_x` (normalized) away from a training sample: `(gamma^2 + 1) delta_x^2`.
pub fn error_bound_at(gamma: f64, delta_x_norm: f64) -> f64 {
    (gamma * gamma + 1.0) * delta_x_norm * delta_x_norm
}

/// `(27 w_bar^2 + 1) / (4 (cbrt(n) - 1)^2)`, in normalized squared units.
pub fn sample_bound(n: usize, w_bar: f64) -> Result<f64> {
    let k = match exact_cube_root(n) {
        Some(k) if k >= 2 => k,
        _ => return Err(Error::NotACube(n)),
    };
    let gap = (k - 1) as f64;
    Ok((27.0 * w_bar * w_bar + 1.0) / (4.0 * gap * gap))
}

/// Linear rescale of a normalized bound into millimetres.
pub fn rescale_to_mm(bound_normalized: f64, scale_mm: f64) -> f64 {
    bound_normalized * scale_mm
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub w_bar: f64,
    pub n: usize,
    pub half_spacing: f64,
    pub bound_normalized: f64,
    pub e_est_mm: f64,
    pub rescale_factor_mm: f64,
}

impl BoundReport {
    /// Computes the report for a model trained on `n` grid samples. `w_bar_override`
    /// pins the averaged weight instead of measuring it from the model.
    pub fn compute(
        p: &NetworkParams,
        n: usize,
        scale_mm: f64,
        w_bar_override: Option<f64>,
    ) -> Result<Self> {
        let w_bar = w_bar_override.unwrap_or_else(|| mean_abs_output_weight(p));
        let bound_normalized = sample_bound(n, w_bar)?;
        let max_w = max_abs_weight(p);
        if max_w > WEIGHT_RANGE {
            log::warn!("largest |weight| is {max_w:.3}, outside the usual [-{WEIGHT_RANGE}, {WEIGHT_RANGE}] range");
        }
        Ok(Self {
            gamma: lipschitz_gamma(p),
            w_bar,
            n,
            half_spacing: half_spacing_normalized(n)?,
            bound_normalized,
            e_est_mm: rescale_to_mm(bound_normalized, scale_mm),
            rescale_factor_mm: scale_mm,
        })
    }
}
