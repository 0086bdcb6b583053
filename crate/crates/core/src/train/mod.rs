//! Training with early stopping, evaluation, baselines and ablations.

mod ablation;
mod baselines;
mod experiment;
mod metrics;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Tape};
use crate::data::EventId;
use crate::error::{MugrepError, Result};
use crate::model::{Checkpoint, ModelShape, ModelWorld, MugRep, SubjectQuery};

pub use ablation::{run_ablation_suite, write_ablation_table, AblationRow, Variant, ABLATION_TABLE_FILE};
pub use baselines::{
    baseline_dnn, baseline_ha, baseline_lr, fit_ridge, HistoricalAverage, RidgeModel, DNN_LR, RIDGE_EPSILON,
};
pub use experiment::{hetero_edges_for, Experiment, TrainConfig};
pub use metrics::{ranks, spearman, CommunityError, Metrics, MetricsReport, COMMUNITY_MAPE_FILE, METRICS_FILE};

pub const TRAIN_LOG_FILE: &str = "train_log.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once validation loss has not decreased for `patience` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: MugRep,
    pub best_epoch: usize,
    /// Epoch 0 holds the losses at initialization.
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn initial_train_loss(&self) -> f64 {
        self.log[0].train_loss
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.log {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| MugrepError::io(path, e))
    }
}

/// MSE of `model` over `subjects`.
pub fn mse(model: &MugRep, world: &ModelWorld, subjects: &[SubjectQuery], targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(MugrepError::EmptyBatch);
    }
    let pred = model.predict(world, subjects)?;
    Ok(pred.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / targets.len() as f64)
}

/// Minibatch Adam on the train split, early-stopped on validation MSE.
pub fn train(exp: &Experiment, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let world = &exp.world;
    let model = MugRep::new(ModelShape::for_world(world, config.dims), config.ablation, config.seed)?;
    train_model(model, world, &exp.split.train, &exp.split.validation, config)
}

pub fn train_model(
    mut model: MugRep,
    world: &ModelWorld,
    train_ids: &[EventId],
    validation_ids: &[EventId],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let train_subjects: Vec<SubjectQuery> = train_ids
        .iter()
        .map(|&id| world.event_subject(id))
        .collect::<Result<_>>()?;
    let train_targets: Vec<f64> = train_ids.iter().map(|&id| world.event_price(id)).collect();
    let val_subjects: Vec<SubjectQuery> = validation_ids
        .iter()
        .map(|&id| world.event_subject(id))
        .collect::<Result<_>>()?;
    let val_targets: Vec<f64> = validation_ids.iter().map(|&id| world.event_price(id)).collect();

    let mut log = vec![EpochLog {
        epoch: 0,
        train_loss: mse(&model, world, &train_subjects, &train_targets)?,
        val_loss: mse(&model, world, &val_subjects, &val_targets)?,
    }];
    let mut stopper = EarlyStopping::new(config.patience_epochs);
    stopper.update(0, log[0].val_loss);
    let mut best = model.clone();
    let mut adam = Adam::new(config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train_subjects.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let subjects: Vec<SubjectQuery> = batch.iter().map(|&i| train_subjects[i].clone()).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| train_targets[i]).collect();
            let plan = model.plan(world, &subjects)?;
            let mut tape = Tape::new();
            let loss = model.batch_loss(&mut tape, &plan, &targets)?;
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(MugrepError::NonFiniteLoss {
                    epoch,
                    detail: format!("batch loss {value}; lower the learning rate or check the inputs"),
                });
            }
            total += value * batch.len() as f64;
            let grads = tape.backward(loss)?;
            adam.step(model.params_mut(), &grads)?;
        }
        let val_loss = mse(&model, world, &val_subjects, &val_targets)?;
        if !val_loss.is_finite() {
            return Err(MugrepError::NonFiniteLoss {
                epoch,
                detail: format!("validation loss {val_loss}"),
            });
        }
        log.push(EpochLog {
            epoch,
            train_loss: total / train_subjects.len() as f64,
            val_loss,
        });
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch: stopper.best_epoch,
        log,
    })
}

/// Test-split report for a trained model.
pub fn evaluate(model: &MugRep, exp: &Experiment, dataset: &crate::data::Dataset) -> Result<MetricsReport> {
    let ids = &exp.split.test;
    let pred = model.predict(&exp.world, &exp.subjects(ids)?)?;
    report_for(&pred, ids, exp, dataset)
}

/// Test-split report for any vector of predictions aligned with `ids`.
pub fn report_for(
    pred: &[f64],
    ids: &[EventId],
    exp: &Experiment,
    dataset: &crate::data::Dataset,
) -> Result<MetricsReport> {
    let truth = exp.targets(ids);
    let communities: Vec<_> = ids.iter().map(|&id| dataset.events[id as usize].community_id).collect();
    let mut volume = std::collections::BTreeMap::new();
    for &id in &exp.split.train {
        *volume.entry(dataset.events[id as usize].community_id).or_insert(0) += 1;
    }
    MetricsReport::build(pred, &truth, &communities, &volume)
}

/// Checkpoint for a trained model of `exp`.
pub fn checkpoint(model: &MugRep, exp: &Experiment, config: &TrainConfig) -> Checkpoint {
    Checkpoint::new(
        model,
        config.hyperparams,
        config.groups,
        exp.features.layout().hash(),
        exp.normalization.clone(),
        config.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_every_epoch_never_stops() {
        let mut s = EarlyStopping::new(30);
        for epoch in 0..200 {
            assert_eq!(s.update(epoch, 100.0 - epoch as f64 * 0.1), StopDecision::Improved);
        }
        assert_eq!(s.best_epoch, 199);
    }

    #[test]
    fn flat_after_k_stops_at_k_plus_patience() {
        let mut s = EarlyStopping::new(30);
        let k = 12;
        let mut stopped = None;
        for epoch in 0..100 {
            let loss = if epoch <= k {
                10.0 - epoch as f64
            } else {
                10.0 - k as f64
            };
            if s.update(epoch, loss) == StopDecision::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(k + 30));
        assert_eq!(s.best_epoch, k);
    }
}
