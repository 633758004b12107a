//! Shallow `3 -> hidden (ReLU) -> 3 (linear)` network, trained from scratch.
//!
//! Parameters live in one flat buffer so the optimizer can treat them as a
//! single vector. Layout, with `h` hidden units:
//!
//! | block | shape        | offset      |
//! |-------|--------------|-------------|
//! | `w1`  | `h x 3`      | `0`         |
//! | `b1`  | `h`          | `3h`        |
//! | `w2`  | `3 x h`      | `4h`        |
//! | `b2`  | `3`          | `7h`        |

mod adam;
mod persist;
mod train;

pub use adam::Adam;
pub use persist::{load_model, save_model, ModelFile, ModelMeta, MODEL_SCHEMA};
pub use train::{
    split_dataset, train, SplitIndices, TrainingConfig, TrainingOutcome, TrainingTrace,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const INPUTS: usize = 3;
pub const OUTPUTS: usize = 3;

/// One normalized input with its joint-angle target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub input: [f64; INPUTS],
    pub target: [f64; OUTPUTS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    hidden: usize,
    data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            data: vec![0.0; 7 * hidden + OUTPUTS],
        }
    }

    /// Builds parameters from explicit blocks. `w1` is `hidden` rows of 3, `w2` is 3 rows of `hidden`.
    pub fn from_parts(
        w1: &[[f64; 3]],
        b1: &[f64],
        w2: &[Vec<f64>; 3],
        b2: [f64; 3],
    ) -> Result<Self> {
        let h = w1.len();
        if h == 0 || b1.len() != h || w2.iter().any(|row| row.len() != h) {
            return Err(Error::Format {
                what: "network parameters",
                reason: format!(
                    "inconsistent shapes: w1 {}x3, b1 {}, w2 rows {:?}",
                    h,
                    b1.len(),
                    w2.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            });
        }
        let mut p = Self::zeros(h);
        p.w1_mut().copy_from_slice(w1.as_flattened());
        p.b1_mut().copy_from_slice(b1);
        for (k, row) in w2.iter().enumerate() {
            p.w2_row_mut(k).copy_from_slice(row);
        }
        p.b2_mut().copy_from_slice(&b2);
        if !p.is_finite() {
            return Err(Error::Format {
                what: "network parameters",
                reason: "non-finite entry".into(),
            });
        }
        Ok(p)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(hidden: usize, seed: u64) -> Self {
        assert!(hidden >= 1, "hidden layer needs at least one unit");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hidden);
        let limit = (6.0 / (INPUTS + hidden) as f64).sqrt();
        for w in p.w1_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        let limit = (6.0 / (hidden + OUTPUTS) as f64).sqrt();
        for w in p.w2_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..3 * self.hidden]
    }
    pub fn w1_mut(&mut self) -> &mut [f64] {
        let h = self.hidden;
        &mut self.data[..3 * h]
    }
    /// Input weights of hidden unit `j`.
    pub fn w1_row(&self, j: usize) -> &[f64] {
        &self.w1()[3 * j..3 * j + 3]
    }

    pub fn b1(&self) -> &[f64] {
        &self.data[3 * self.hidden..4 * self.hidden]
    }
    pub fn b1_mut(&mut self) -> &mut [f64] {
        let h = self.hidden;
        &mut self.data[3 * h..4 * h]
    }

    pub fn w2(&self) -> &[f64] {
        &self.data[4 * self.hidden..7 * self.hidden]
    }
    pub fn w2_mut(&mut self) -> &mut [f64] {
        let h = self.hidden;
        &mut self.data[4 * h..7 * h]
    }
    /// Hidden-to-output weights feeding output `k`.
    pub fn w2_row(&self, k: usize) -> &[f64] {
        &self.w2()[k * self.hidden..(k + 1) * self.hidden]
    }
    pub fn w2_row_mut(&mut self, k: usize) -> &mut [f64] {
        let h = self.hidden;
        &mut self.w2_mut()[k * h..(k + 1) * h]
    }

    pub fn b2(&self) -> &[f64] {
        &self.data[7 * self.hidden..]
    }
    pub fn b2_mut(&mut self) -> &mut [f64] {
        let h = self.hidden;
        &mut self.data[7 * h..]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn pre_activations(&self, x: &[f64; INPUTS]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let w = self.w1_row(j);
                w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + self.b1()[j]
            })
            .collect()
    }

    /// Hidden units with strictly positive pre-activation at `x`.
    pub fn activation_mask(&self, x: &[f64; INPUTS]) -> Vec<bool> {
        self.pre_activations(x)
            .into_iter()
            .map(|z| z > 0.0)
            .collect()
    }

    pub fn forward(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let hidden: Vec<f64> = self
            .pre_activations(x)
            .into_iter()
            .map(|z| z.max(0.0))
            .collect();
        std::array::from_fn(|k| {
            self.w2_row(k)
                .iter()
                .zip(&hidden)
                .map(|(w, u)| w * u)
                .sum::<f64>()
                + self.b2()[k]
        })
    }

    /// Mean squared error over the batch and the three outputs.
    pub fn loss(&self, batch: &[Sample]) -> f64 {
        assert!(!batch.is_empty(), "loss of an empty batch");
        let total: f64 = batch
            .iter()
            .map(|s| {
                let q = self.forward(&s.input);
                (0..OUTPUTS)
                    .map(|k| (q[k] - s.target[k]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        total / (batch.len() * OUTPUTS) as f64
    }

    /// Exact gradient of [`loss`](Self::loss), returned in the same layout as the parameters.
    /// The ReLU derivative at exactly zero is taken as 0.
    pub fn backward(&self, batch: &[Sample]) -> NetworkParams {
        assert!(!batch.is_empty(), "gradient of an empty batch");
        let h = self.hidden;
        let mut grad = NetworkParams::zeros(h);
        let scale = 2.0 / (batch.len() * OUTPUTS) as f64;
        let mut act = vec![0.0; h];
        let mut delta_hidden = vec![0.0; h];
        for s in batch {
            let pre = self.pre_activations(&s.input);
            for (a, z) in act.iter_mut().zip(&pre) {
                *a = z.max(0.0);
            }
            let q = self.forward(&s.input);
            let delta_out: [f64; OUTPUTS] = std::array::from_fn(|k| scale * (q[k] - s.target[k]));

            delta_hidden.iter_mut().for_each(|d| *d = 0.0);
            for (k, dk) in delta_out.iter().enumerate() {
                grad.b2_mut()[k] += dk;
                let w_row = self.w2_row(k);
                let g_row = grad.w2_row_mut(k);
                for j in 0..h {
                    g_row[j] += dk * act[j];
                    delta_hidden[j] += dk * w_row[j];
                }
            }
            for j in 0..h {
                if pre[j] <= 0.0 {
                    continue;
                }
                let d = delta_hidden[j];
                grad.b1_mut()[j] += d;
                let g = &mut grad.w1_mut()[3 * j..3 * j + 3];
                for (gi, xi) in g.iter_mut().zip(&s.input) {
                    *gi += d * xi;
                }
            }
        }
        grad
    }
}
