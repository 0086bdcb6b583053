use serde::{Deserialize, Serialize};

use crate::error::{MugrepError, Result};

use super::layout::FeatureLayout;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-slot training mean and population std. Slots that are not numeric
/// carry mean 0 and std 1 and pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

pub fn fit_normalizer(layout: &FeatureLayout, rows: &[Vec<f64>]) -> Result<NormalizationStats> {
    if rows.is_empty() {
        return Err(MugrepError::EmptyBatch);
    }
    let width = layout.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(MugrepError::ShapeMismatch(format!(
            "feature row has {} slots, layout has {width}",
            bad.len()
        )));
    }
    let (mean, std) = column_moments(rows, width);
    let (mean, std) = layout
        .slots
        .iter()
        .zip(mean.into_iter().zip(std))
        .map(|(slot, (m, s))| if slot.kind.is_numeric() { (m, s) } else { (0.0, 1.0) })
        .unzip();
    Ok(NormalizationStats { mean, std })
}

fn column_moments(rows: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    (mean, std)
}

/// Z-score every column of `rows` with its own statistics.
pub fn zscore_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(width) = rows.first().map(Vec::len) else {
        return Vec::new();
    };
    let (mean, std) = column_moments(rows, width);
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect()
}
