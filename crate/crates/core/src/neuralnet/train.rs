use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Adam, NetworkParams, Sample};
use crate::error::{Error, Result};
use crate::sampler::{normalize_input, TrainingSet};

// RNG streams derived from the single run seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Smallest validation-loss decrease (rad^2) that counts as improvement.
    pub min_delta: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub early_stopping: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 0.001,
            batch_size: 8,
            max_epochs: 500,
            patience: 10,
            min_delta: 1e-5,
            val_fraction: 0.05,
            test_fraction: 0.05,
            seed: 42,
            early_stopping: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| (0.0..0.5).contains(&f);
        if self.hidden == 0 {
            return Err(Error::invalid("hidden must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !frac_ok(self.val_fraction) || !frac_ok(self.test_fraction) {
            return Err(Error::invalid(
                "validation/test fractions must lie in [0, 0.5)",
            ));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::invalid("min_delta must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Held-out count: round-half-up of `fraction * n`, at least one sample unless the fraction is zero.
fn held_out(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    ((fraction * n as f64 + 0.5).floor() as usize).max(1)
}

/// Seeded shuffle of `0..n` into validation, test and training index sets.
pub fn split_dataset(n: usize, cfg: &TrainingConfig, seed: u64) -> Result<SplitIndices> {
    let n_val = held_out(n, cfg.val_fraction);
    let n_test = held_out(n, cfg.test_fraction);
    if n_val + n_test >= n {
        return Err(Error::invalid(format!(
            "{n} samples leave no training data after holding out {n_val} + {n_test}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_SPLIT);
    idx.shuffle(&mut rng);
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(n - n_test - n_val);
    Ok(SplitIndices {
        train: idx,
        val,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingTrace {
    /// Train and validation loss of the kept parameters.
    pub fn final_losses(&self) -> (f64, f64) {
        let i = self.best_epoch.saturating_sub(1);
        (
            self.train_loss.get(i).copied().unwrap_or(f64::NAN),
            self.val_loss.get(i).copied().unwrap_or(f64::NAN),
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub params: NetworkParams,
    pub trace: TrainingTrace,
    pub split: SplitIndices,
}

/// Mini-batch Adam on MSE with optional early stopping on validation loss.
///
/// Per-epoch losses are full-pass losses over the train and validation sets
/// after the epoch's updates. With no validation samples the training loss is
/// monitored instead.
pub fn train(ds: &TrainingSet, cfg: &TrainingConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let samples: Vec<Sample> = ds
        .pairs
        .iter()
        .map(|(x, q)| Sample {
            input: normalize_input(x, &ds.bounds),
            target: q.to_array(),
        })
        .collect();
    let split = split_dataset(samples.len(), cfg, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i]).collect::<Vec<_>>();
    let train_set = pick(&split.train);
    let val_set = pick(&split.val);

    let mut params = NetworkParams::init(cfg.hidden, cfg.seed);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_SHUFFLE);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut trace = TrainingTrace::default();
    let mut best: Option<(f64, NetworkParams)> = None;
    let mut wait = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let grads = params.backward(&batch);
            opt.step(&mut params, &grads);
        }
        let train_loss = params.loss(&train_set);
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            params.loss(&val_set)
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.train_loss.push(train_loss);
        trace.val_loss.push(val_loss);
        trace.epochs_run = epoch;

        if !cfg.early_stopping {
            continue;
        }
        match &best {
            Some((b, _)) if val_loss > b - cfg.min_delta => {
                wait += 1;
                if wait >= cfg.patience {
                    trace.stopped_early = true;
                    break;
                }
            }
            _ => {
                best = Some((val_loss, params.clone()));
                trace.best_epoch = epoch;
                wait = 0;
            }
        }
    }

    match best {
        Some((_, p)) if cfg.early_stopping => params = p,
        _ => trace.best_epoch = trace.epochs_run,
    }
    Ok(TrainingOutcome {
        params,
        trace,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RobotGeometry;
    use crate::sampler::{generate_grid, WorkspaceBox};

    fn grid(k: usize) -> TrainingSet {
        generate_grid(&WorkspaceBox::default(), k, &RobotGeometry::default()).unwrap()
    }

    #[test]
    fn split_sizes() {
        let cfg = TrainingConfig::default();
        assert_eq!(split_dataset(125, &cfg, 1).unwrap().sizes(), (113, 6, 6));
        assert_eq!(split_dataset(8, &cfg, 1).unwrap().sizes(), (6, 1, 1));
        assert_eq!(split_dataset(27, &cfg, 1).unwrap().sizes(), (25, 1, 1));
        assert_eq!(split_dataset(64, &cfg, 1).unwrap().sizes(), (58, 3, 3));
        assert_eq!(split_dataset(216, &cfg, 1).unwrap().sizes(), (194, 11, 11));
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let cfg = TrainingConfig::default();
        let a = split_dataset(125, &cfg, 5).unwrap();
        assert_eq!(a, split_dataset(125, &cfg, 5).unwrap());
        assert_ne!(a, split_dataset(125, &cfg, 6).unwrap());
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..125).collect::<Vec<_>>());
    }

    #[test]
    fn split_needs_training_data() {
        let cfg = TrainingConfig::default();
        assert!(split_dataset(2, &cfg, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainingConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainingConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainingConfig {
                val_fraction: 0.5,
                ..Default::default()
            },
            TrainingConfig {
                hidden: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn k5_converges() {
        let cfg = TrainingConfig {
            seed: 42,
            ..Default::default()
        };
        let out = train(&grid(5), &cfg).unwrap();
        let (train_loss, _) = out.trace.final_losses();
        assert!(train_loss < 1e-2, "final train loss {train_loss}");
        assert!(out.trace.epochs_run <= cfg.max_epochs);
        let best_val = out
            .trace
            .val_loss
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(best_val <= out.trace.val_loss[0]);
    }

    #[test]
    fn tiny_grid_stays_rough() {
        let out = train(&grid(2), &TrainingConfig::default()).unwrap();
        let (_, val) = out.trace.final_losses();
        assert!(
            val.is_finite() && val > 1e-3 && val < 10.0,
            "val loss {val}"
        );
    }

    #[test]
    fn no_early_stop_runs_all_epochs() {
        let cfg = TrainingConfig {
            early_stopping: false,
            max_epochs: 500,
            ..Default::default()
        };
        let out = train(&grid(2), &cfg).unwrap();
        assert_eq!(out.trace.epochs_run, 500);
        assert!(!out.trace.stopped_early);
        assert_eq!(out.trace.train_loss.len(), 500);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainingConfig {
            max_epochs: 40,
            ..Default::default()
        };
        let a = train(&grid(3), &cfg).unwrap();
        let b = train(&grid(3), &cfg).unwrap();
        let bits = |p: &NetworkParams| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.params), bits(&b.params));
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainingConfig {
            learning_rate: 1e300,
            ..Default::default()
        };
        assert!(matches!(
            train(&grid(3), &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }
}
