//! Optimizers, seeded initialization and the shared mini-batch loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
}

impl TrainingConfig {
    /// Momentum SGD defaults for the MNIST classifiers.
    pub fn sgd_default() -> Self {
        Self {
            seed: 0,
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.1,
            optimizer: OptimizerKind::Sgd { momentum: 0.9 },
        }
    }

    /// Adam defaults for the transformer models.
    pub fn adam_default() -> Self {
        Self {
            seed: 0,
            epochs: 30,
            batch_size: 8,
            learning_rate: 3e-4,
            optimizer: OptimizerKind::ADAM,
        }
    }

    /// Epochs may be zero; everything else must be positive.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning rate {} must be positive", self.learning_rate)));
        }
        let ok = match self.optimizer {
            OptimizerKind::Sgd { momentum } => (0.0..1.0).contains(&momentum),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if !ok {
            return Err(Error::param(format!("invalid optimizer settings {:?}", self.optimizer)));
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub train_seconds: f64,
    pub param_count: usize,
    pub steps: usize,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.loss_curve.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

pub(crate) fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    rng
}

/// `rows × cols` weights uniform in ±1/√fan_in.
pub(crate) fn uniform_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: &TrainingConfig, params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect::<Vec<_>>();
        let second = match cfg.optimizer {
            OptimizerKind::Adam { .. } => zeros(),
            OptimizerKind::Sgd { .. } => Vec::new(),
        };
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            first: zeros(),
            second,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pi, gi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(v.as_mut_slice()) {
                        *vi = momentum * *vi + gi;
                        *pi -= self.lr * *vi;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    let it = p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice());
                    for (((pi, gi), mi), vi) in it {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *pi -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// How a non-finite loss is reported.
#[derive(Debug, Clone, Copy)]
pub(crate) enum DivergeUnit {
    Epoch,
    Step,
}

#[derive(Debug)]
pub(crate) struct LoopOutcome {
    pub loss_curve: Vec<f64>,
    pub seconds: f64,
    pub steps: usize,
}

/// Shuffled mini-batch training over sample indices `0..n`.
///
/// `batch_loss` returns the mean loss over the batch and one gradient per
/// parameter tensor.
pub(crate) fn minibatch_loop<F>(
    params: &mut [Matrix],
    n: usize,
    cfg: &TrainingConfig,
    unit: DivergeUnit,
    mut batch_loss: F,
) -> Result<LoopOutcome>
where
    F: FnMut(&[Matrix], &[usize]) -> Result<(f64, Vec<Matrix>)>,
{
    cfg.validate()?;
    if n == 0 && cfg.epochs > 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle.set_stream(SHUFFLE_STREAM);
    let mut opt = Optimizer::new(cfg, params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_loss(params, batch)?;
            if !loss.is_finite() || grads.iter().any(|g| g.as_slice().iter().any(|v| !v.is_finite())) {
                return Err(match unit {
                    DivergeUnit::Epoch => Error::Diverged {
                        stage: "epoch",
                        index: epoch,
                    },
                    DivergeUnit::Step => Error::Diverged {
                        stage: "step",
                        index: steps,
                    },
                });
            }
            opt.step(params, &grads);
            total += loss * batch.len() as f64;
            steps += 1;
        }
        curve.push(total / n as f64);
    }
    Ok(LoopOutcome {
        loss_curve: curve,
        seconds: start.elapsed().as_secs_f64(),
        steps,
    })
}

/// Every parameter tensor concatenated in declaration order.
pub fn flatten_params(params: &[Matrix]) -> Vec<f64> {
    params.iter().flat_map(|p| p.as_slice().iter().copied()).collect()
}

/// Inverse of [`flatten_params`].
pub fn load_flat_params(params: &mut [Matrix], flat: &[f64]) -> Result<()> {
    let total: usize = params.iter().map(Matrix::len).sum();
    if total != flat.len() {
        return Err(Error::shape(format!("{} values for {total} parameters", flat.len())));
    }
    let mut off = 0;
    for p in params {
        let n = p.len();
        p.as_mut_slice().copy_from_slice(&flat[off..off + n]);
        off += n;
    }
    Ok(())
}

pub(crate) fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let cfg = TrainingConfig {
            learning_rate: 0.01,
            ..TrainingConfig::adam_default()
        };
        let mut p = vec![Matrix::filled(1, 2, 1.0)];
        let mut opt = Optimizer::new(&cfg, &p);
        opt.step(&mut p, &[Matrix::from_rows(&[vec![3.0, -0.5]]).unwrap()]);
        // bias-corrected m/√v = sign(g) on the first step
        assert!((p[0][(0, 0)] - 0.99).abs() < 1e-9);
        assert!((p[0][(0, 1)] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let cfg = TrainingConfig::sgd_default();
        let mut p = vec![Matrix::zeros(1, 1)];
        let mut opt = Optimizer::new(&cfg, &p);
        let g = [Matrix::filled(1, 1, 1.0)];
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        // v1 = 1, v2 = 1.9; p = −0.1·(1 + 1.9)
        assert!((p[0][(0, 0)] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_leave_params_untouched() {
        let cfg = TrainingConfig {
            epochs: 0,
            ..TrainingConfig::sgd_default()
        };
        let mut p = vec![Matrix::filled(2, 2, 0.5)];
        let out = minibatch_loop(&mut p, 4, &cfg, DivergeUnit::Epoch, |_, _| unreachable!()).unwrap();
        assert!(out.loss_curve.is_empty());
        assert_eq!(p[0], Matrix::filled(2, 2, 0.5));
    }

    #[test]
    fn nan_loss_names_the_epoch() {
        let cfg = TrainingConfig {
            epochs: 3,
            batch_size: 2,
            ..TrainingConfig::sgd_default()
        };
        let mut p = vec![Matrix::zeros(1, 1)];
        let mut calls = 0;
        let err = minibatch_loop(&mut p, 4, &cfg, DivergeUnit::Epoch, |_, _| {
            calls += 1;
            let loss = if calls == 4 { f64::NAN } else { 1.0 };
            Ok((loss, vec![Matrix::zeros(1, 1)]))
        })
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { stage: "epoch", index: 1 }));
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::sgd_default().validate().is_ok());
        let bad = TrainingConfig {
            batch_size: 0,
            ..TrainingConfig::sgd_default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig {
            learning_rate: -1.0,
            ..TrainingConfig::adam_default()
        };
        assert!(bad.validate().is_err());
    }
}
