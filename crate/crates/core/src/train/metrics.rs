use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CommunityId;
use crate::error::{MugrepError, Result};

pub const METRICS_FILE: &str = "metrics.json";
pub const COMMUNITY_MAPE_FILE: &str = "community_mape.csv";

/// MAE, MAPE (as a fraction) and RMSE over `n` predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mape: f64,
    pub rmse: f64,
    pub n: usize,
}

impl Metrics {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(MugrepError::ShapeMismatch(format!(
                "{} predictions for {} targets",
                pred.len(),
                truth.len()
            )));
        }
        if truth.is_empty() {
            return Err(MugrepError::EmptyBatch);
        }
        if let Some(y) = truth.iter().find(|y| !(**y > 0.0)) {
            return Err(MugrepError::InvalidAttribute {
                field: "price".into(),
                value: y.to_string(),
            });
        }
        let n = truth.len() as f64;
        let (mut abs, mut pct, mut sq) = (0.0, 0.0, 0.0);
        for (p, y) in pred.iter().zip(truth) {
            let e = (p - y).abs();
            abs += e;
            pct += e / y;
            sq += e * e;
        }
        Ok(Metrics {
            mae: abs / n,
            mape: pct / n,
            rmse: (sq / n).sqrt(),
            n: truth.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityError {
    pub n_test: usize,
    pub n_train: usize,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mape: f64,
    pub rmse: f64,
    pub n_evaluated: usize,
    pub per_community: BTreeMap<CommunityId, CommunityError>,
}

impl MetricsReport {
    /// `communities[i]` is the community of the i-th prediction;
    /// `train_volume` counts training transactions per community.
    pub fn build(
        pred: &[f64],
        truth: &[f64],
        communities: &[CommunityId],
        train_volume: &BTreeMap<CommunityId, usize>,
    ) -> Result<Self> {
        let overall = Metrics::compute(pred, truth)?;
        if communities.len() != truth.len() {
            return Err(MugrepError::ShapeMismatch(
                "one community per prediction expected".into(),
            ));
        }
        let mut groups: BTreeMap<CommunityId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ((p, y), c) in pred.iter().zip(truth).zip(communities) {
            let g = groups.entry(*c).or_default();
            g.0.push(*p);
            g.1.push(*y);
        }
        let per_community = groups
            .into_iter()
            .map(|(c, (p, y))| {
                let m = Metrics::compute(&p, &y)?;
                Ok((
                    c,
                    CommunityError {
                        n_test: m.n,
                        n_train: train_volume.get(&c).copied().unwrap_or(0),
                        mape: m.mape,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(MetricsReport {
            mae: overall.mae,
            mape: overall.mape,
            rmse: overall.rmse,
            n_evaluated: overall.n,
            per_community,
        })
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            mae: self.mae,
            mape: self.mape,
            rmse: self.rmse,
            n: self.n_evaluated,
        }
    }

    pub fn write_community_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["community_id", "n_test", "n_train", "mape"])?;
        for (c, e) in &self.per_community {
            w.write_record([
                c.to_string(),
                e.n_test.to_string(),
                e.n_train.to_string(),
                e.mape.to_string(),
            ])?;
        }
        w.flush().map_err(|e| MugrepError::io(path, e))
    }

    /// Spearman correlation of per-community MAPE with inverse train volume
    /// (communities without training data rank as the most inverse).
    pub fn mape_volume_spearman(&self) -> Option<f64> {
        let (mape, inv): (Vec<f64>, Vec<f64>) = self
            .per_community
            .values()
            .map(|e| {
                (
                    e.mape,
                    if e.n_train == 0 {
                        f64::INFINITY
                    } else {
                        1.0 / e.n_train as f64
                    },
                )
            })
            .unzip();
        spearman(&mape, &inv)
    }
}

/// Average ranks starting at 1; ties share the mean of their positions.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation of the ranks. `None` when undefined.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
