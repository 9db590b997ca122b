use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{batch_from_clouds, stack_targets, ForwardMode, RegressorModel};
use crate::error::{GraspError, Result};
use crate::geometry::{Point3, UnitedParams};
use crate::seeding::{rng_from_seed, SeededRng};

/// One network-ready training example.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    /// Centred cloud, all samples in a run share the same point count.
    pub points: Vec<Point3>,
    pub target: UnitedParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLoss>,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Splits `0..len` into batches of `size`, folding a trailing singleton into
/// the previous batch so batch statistics are always defined.
fn batch_bounds(len: usize, size: usize) -> Vec<(usize, usize)> {
    let size = size.max(1);
    let mut out: Vec<(usize, usize)> = (0..len)
        .step_by(size)
        .map(|s| (s, (s + size).min(len)))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|(s, e)| e - s == 1) {
        let (_, e) = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").1 = e;
    }
    out
}

/// Epoch-level optimiser driver: owns the Adam state and the shuffling /
/// dropout RNG so callers can feed different data each epoch.
pub struct Trainer {
    pub config: TrainConfig,
    adam: AdamState,
    rng: SeededRng,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: &RegressorModel, config: TrainConfig) -> Self {
        Self {
            adam: AdamState::for_model(model, config.adam.clone()),
            rng: rng_from_seed(config.seed),
            config,
            epoch: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.adam.learning_rate()
    }

    pub fn rng(&mut self) -> &mut SeededRng {
        &mut self.rng
    }

    /// Shuffled mini-batch pass with dropout and running-stat updates.
    /// Returns the sample-weighted mean training loss.
    pub fn run_epoch(&mut self, model: &mut RegressorModel, data: &[PreparedSample]) -> Result<f64> {
        if data.is_empty() {
            return Err(GraspError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for (s, e) in batch_bounds(order.len(), self.config.batch_size) {
            let idx = &order[s..e];
            let clouds: Vec<&[Point3]> = idx.iter().map(|&i| data[i].points.as_slice()).collect();
            let targets: Vec<[f64; 6]> = idx.iter().map(|&i| data[i].target.to_array()).collect();
            let batch = batch_from_clouds(&clouds)?;
            let targets = stack_targets(&targets);
            let (loss, grads, cache) =
                model.loss_and_gradients(&batch, &targets, Some(&mut self.rng))?;
            model.update_running_stats(&cache);
            self.adam.step(model.parameters_mut(), &grads)?;
            total += loss * idx.len() as f64;
        }
        self.adam.end_epoch();
        self.epoch += 1;
        Ok(total / data.len() as f64)
    }
}

/// Inference-mode mean loss over `data`.
pub fn evaluate_loss(model: &RegressorModel, data: &[PreparedSample], batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(GraspError::EmptyDataset);
    }
    let mut total = 0.0;
    for chunk in data.chunks(batch_size.max(1)) {
        let clouds: Vec<&[Point3]> = chunk.iter().map(|s| s.points.as_slice()).collect();
        let targets: Vec<[f64; 6]> = chunk.iter().map(|s| s.target.to_array()).collect();
        let loss = model.loss(
            &batch_from_clouds(&clouds)?,
            &stack_targets(&targets),
            ForwardMode::Inference,
        )?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains on a fixed dataset for `config.epochs` epochs.
pub fn train(
    model: &mut RegressorModel,
    train_set: &[PreparedSample],
    validation_set: &[PreparedSample],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if train_set.is_empty() {
        return Err(GraspError::EmptyDataset);
    }
    let mut trainer = Trainer::new(model, config.clone());
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let learning_rate = trainer.learning_rate();
        let train_loss = trainer.run_epoch(model, train_set)?;
        let validation_loss = if validation_set.is_empty() {
            None
        } else {
            Some(evaluate_loss(model, validation_set, config.batch_size)?)
        };
        history.epochs.push(EpochLoss {
            epoch,
            train_loss,
            validation_loss,
            learning_rate,
        });
    }
    Ok(history)
}
