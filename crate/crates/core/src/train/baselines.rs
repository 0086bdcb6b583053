//! HA, LR and DNN reference predictors.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{train_model, Experiment, TrainConfig, TrainOutcome};
use crate::data::{CommunityId, Day, EventId, TransactionEvent};
use crate::error::{MugrepError, Result};
use crate::features::HISTORY_WINDOW_DAYS;
use crate::model::{AblationConfig, ModelShape, MugRep};

pub const RIDGE_EPSILON: f64 = 1e-6;
pub const DNN_LR: f64 = 0.005;

/// Running price sums, per community and overall, for strictly-earlier queries.
#[derive(Debug, Clone, Default)]
pub struct HistoricalAverage {
    by_community: HashMap<CommunityId, Prefix>,
    global: Prefix,
}

#[derive(Debug, Clone, Default)]
struct Prefix {
    dates: Vec<Day>,
    /// `sums[i]` is the sum of the first `i` prices.
    sums: Vec<f64>,
}

impl Prefix {
    fn build(mut list: Vec<(Day, f64)>) -> Self {
        list.sort_by_key(|(d, _)| *d);
        let mut sums = Vec::with_capacity(list.len() + 1);
        sums.push(0.0);
        for (_, p) in &list {
            sums.push(sums.last().unwrap() + p);
        }
        Prefix {
            dates: list.into_iter().map(|(d, _)| d).collect(),
            sums,
        }
    }

    /// Mean of prices dated in `[from, until)`.
    fn mean(&self, from: Day, until: Day) -> Option<f64> {
        let lo = self.dates.partition_point(|d| *d < from);
        let hi = self.dates.partition_point(|d| *d < until);
        (hi > lo).then(|| (self.sums[hi] - self.sums[lo]) / (hi - lo) as f64)
    }
}

impl HistoricalAverage {
    pub fn new(events: &[TransactionEvent]) -> Self {
        let mut grouped: HashMap<CommunityId, Vec<(Day, f64)>> = HashMap::new();
        let mut all = Vec::new();
        for e in events {
            if let Some(p) = e.price {
                grouped.entry(e.community_id).or_default().push((e.date, p));
                all.push((e.date, p));
            }
        }
        HistoricalAverage {
            by_community: grouped.into_iter().map(|(c, v)| (c, Prefix::build(v))).collect(),
            global: Prefix::build(all),
        }
    }

    /// Community mean over the window before `date`, else the community's
    /// all-time mean before `date`, else the global mean before `date`.
    /// `None` only when nothing at all was sold before `date`.
    pub fn predict(&self, community_id: CommunityId, date: Day) -> Option<f64> {
        let own = self.by_community.get(&community_id);
        own.and_then(|p| p.mean(date - HISTORY_WINDOW_DAYS, date))
            .or_else(|| own.and_then(|p| p.mean(Day::MIN, date)))
            .or_else(|| self.global.mean(Day::MIN, date))
    }
}

/// HA predictions for `queries` given the priced `history`.
pub fn baseline_ha(history: &[TransactionEvent], queries: &[(CommunityId, Day)]) -> Vec<Option<f64>> {
    let ha = HistoricalAverage::new(history);
    queries.iter().map(|&(c, d)| ha.predict(c, d)).collect()
}

/// Linear model `y = w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Least squares on centered data with an `epsilon` ridge on the weights.
/// The intercept is not penalized.
pub fn fit_ridge(rows: &[Vec<f64>], y: &[f64], epsilon: f64) -> Result<RidgeModel> {
    if rows.is_empty() {
        return Err(MugrepError::EmptyBatch);
    }
    if rows.len() != y.len() {
        return Err(MugrepError::ShapeMismatch(format!(
            "{} rows for {} targets",
            rows.len(),
            y.len()
        )));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(MugrepError::ShapeMismatch("ragged feature rows".into()));
    }
    let n = rows.len() as f64;
    let mean_x: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mean_y = y.iter().sum::<f64>() / n;
    let xc = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j] - mean_x[j]);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean_y));
    let gram = xc.tr_mul(&xc) + DMatrix::identity(d, d) * epsilon;
    let rhs = xc.tr_mul(&yc);
    let w = gram
        .cholesky()
        .ok_or_else(|| MugrepError::ShapeMismatch("ridge system is not positive definite".into()))?
        .solve(&rhs);
    let intercept = mean_y - w.iter().zip(&mean_x).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeModel {
        weights: w.iter().copied().collect(),
        intercept,
    })
}

/// Ridge regression fit on the normalized train features of `exp`.
pub fn baseline_lr(exp: &Experiment, train_ids: &[EventId]) -> Result<RidgeModel> {
    let rows: Vec<Vec<f64>> = train_ids.iter().map(|&id| exp.world.event_x(id).to_vec()).collect();
    fit_ridge(&rows, &exp.targets(train_ids), RIDGE_EPSILON)
}

/// Two hidden layers on the features alone: the model with every module
/// and multitask heads switched off, trained at the DNN learning rate.
pub fn baseline_dnn(exp: &Experiment, config: &TrainConfig) -> Result<TrainOutcome> {
    let config = TrainConfig {
        lr: DNN_LR,
        ablation: AblationConfig::COLLAPSED,
        ..config.clone()
    };
    config.validate()?;
    let model = MugRep::new(
        ModelShape::for_world(&exp.world, config.dims),
        config.ablation,
        config.seed,
    )?;
    train_model(model, &exp.world, &exp.split.train, &exp.split.validation, &config)
}
