//! Shuffled-dataset contrast and the momentum-SGD training loop.

use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use super::model::{GraphEstimate, ModelError, RegressionModel};
use crate::diffnet::{DiffnetError, OptimizerState};
use crate::matrix::Matrix;
use crate::mixing::GroupedDataset;
use crate::rng::{self, Rng};

/// Consecutive iterations above the divergence level that abort training.
pub const DIVERGENCE_PATIENCE: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch of {batch} exceeds the {n} available samples")]
    BatchTooLarge { batch: usize, n: usize },
    #[error("loss diverged (above 10·ln 2 for {DIVERGENCE_PATIENCE} iterations) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("non-finite loss or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub eval_every: usize,
    /// learning-rate multiplier applied once `decay_at · iterations` is reached
    pub lr_decay: f64,
    pub decay_at: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            iterations: 50_000,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
            eval_every: 100,
            lr_decay: 0.3,
            decay_at: 2.0 / 3.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.iterations == 0 || self.eval_every == 0 {
            return Err(TrainError::InvalidConfig("batch_size, iterations and eval_every must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::InvalidConfig("momentum must lie in [0, 1)"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) || !(0.0..=1.0).contains(&self.decay_at) {
            return Err(TrainError::InvalidConfig("lr_decay must lie in (0, 1] and decay_at in [0, 1]"));
        }
        Ok(())
    }

    fn learning_rate_at(&self, it: usize) -> f64 {
        if (it as f64) >= self.decay_at * self.iterations as f64 { self.learning_rate * self.lr_decay } else { self.learning_rate }
    }
}

/// Positives followed by negatives, with labels 1 and 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ShuffledBatch {
    pub inputs: Matrix,
    pub labels: Vec<f64>,
}

impl ShuffledBatch {
    pub fn batch_size(&self) -> usize {
        self.labels.len() / 2
    }

    pub fn positives(&self) -> Matrix {
        self.inputs.select_rows(&(0..self.batch_size()).collect::<Vec<_>>())
    }

    pub fn negatives(&self) -> Matrix {
        let b = self.batch_size();
        self.inputs.select_rows(&(b..2 * b).collect::<Vec<_>>())
    }
}

/// Draws `batch` original rows and `batch` shuffled rows whose group blocks
/// come from independently drawn sample indices over the whole dataset.
pub fn build_shuffled_batch(data: &GroupedDataset, batch: usize, rng: &mut Rng) -> Result<ShuffledBatch, TrainError> {
    let n = data.n();
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if batch > n {
        return Err(TrainError::BatchTooLarge { batch, n });
    }
    let d = data.layout.total();
    let mut inputs = Matrix::zeros(2 * batch, d);
    for i in 0..batch {
        let src = rng.random_range(0..n);
        inputs.row_mut(i).copy_from_slice(data.x.row(src));
    }
    for i in 0..batch {
        for m in 0..data.layout.num_groups() {
            let src = rng.random_range(0..n);
            let range = data.layout.range(m);
            inputs.row_mut(batch + i)[range.clone()].copy_from_slice(&data.x.row(src)[range]);
        }
    }
    let mut labels = alloc::vec![1.0; batch];
    labels.resize(2 * batch, 0.0);
    Ok(ShuffledBatch { inputs, labels })
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Mean logistic cross-entropy of logits against labels.
pub fn cross_entropy(logits: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = logits.iter().zip(labels).map(|(&r, &y)| y * softplus(-r) + (1.0 - y) * softplus(r)).sum();
    total / logits.len() as f64
}

pub fn batch_loss(model: &RegressionModel, batch: &ShuffledBatch) -> Result<f64, TrainError> {
    Ok(cross_entropy(&model.logits(&batch.inputs)?, &batch.labels))
}

/// Mean loss over `batches` fresh shuffled batches.
pub fn evaluate_loss(model: &RegressionModel, data: &GroupedDataset, batch: usize, batches: usize, seed: u64) -> Result<f64, TrainError> {
    let mut rng = rng::seeded(seed);
    let mut total = 0.0;
    for _ in 0..batches {
        total += batch_loss(model, &build_shuffled_batch(data, batch, &mut rng)?)?;
    }
    Ok(total / batches.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: RegressionModel,
    /// `(iteration, mean loss since the previous record)`; the first entry is
    /// the loss before any update.
    pub trace: Vec<(usize, f64)>,
    pub final_loss: f64,
}

pub fn train(model: RegressionModel, data: &GroupedDataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with(model, data, cfg, |_, _| {})
}

/// Training loop; `observe(iteration, loss)` is called at every trace record.
pub fn train_with(
    mut model: RegressionModel,
    data: &GroupedDataset,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.layout.dims() != model.layout.dims() {
        return Err(ModelError::DimensionMismatch { expected: model.layout.total(), found: data.layout.total() }.into());
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.momentum, &model);
    let limit = 10.0 * core::f64::consts::LN_2;
    let mut above = 0usize;
    let mut trace = Vec::new();
    let (mut window_sum, mut window_len) = (0.0, 0usize);
    let mut last_window = f64::NAN;
    for it in 0..cfg.iterations {
        let batch = build_shuffled_batch(data, cfg.batch_size, &mut rng)?;
        let rows = batch.labels.len() as f64;
        let labels = &batch.labels;
        let (logits, grads) = model.logits_and_gradients(&batch.inputs, |r| {
            r.iter().zip(labels).map(|(&ri, &y)| (sigmoid(ri) - y) / rows).collect()
        })?;
        let loss = cross_entropy(&logits, labels);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { iteration: it });
        }
        above = if loss > limit { above + 1 } else { 0 };
        if above >= DIVERGENCE_PATIENCE {
            return Err(TrainError::Diverged { iteration: it });
        }
        window_sum += loss;
        window_len += 1;
        if it == 0 || (it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations {
            let mean = window_sum / window_len as f64;
            let at = if it == 0 { 0 } else { it + 1 };
            trace.push((at, mean));
            observe(at, mean);
            if it != 0 {
                last_window = mean;
            }
            window_sum = 0.0;
            window_len = 0;
        }
        opt.learning_rate = cfg.learning_rate_at(it);
        opt.step(&mut model, &grads).map_err(|e| match e {
            DiffnetError::NonFiniteBlock { .. } => TrainError::NonFinite { iteration: it },
            other => TrainError::Model(ModelError::Network(other)),
        })?;
    }
    let final_loss = if last_window.is_nan() { trace.last().map_or(f64::NAN, |t| t.1) } else { last_window };
    Ok(TrainOutcome { model, trace, final_loss })
}

/// Applies each feature extractor to its group's columns.
pub fn extract_latents(model: &RegressionModel, data: &GroupedDataset) -> Result<Matrix, TrainError> {
    Ok(model.features_of(&data.x)?)
}

pub fn extract_graph(model: &RegressionModel) -> GraphEstimate {
    model.graph_estimate()
}
