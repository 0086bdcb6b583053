use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AblationConfig, ModelShape, MugRep};
use crate::autodiff::Matrix;
use crate::error::{MugrepError, Result};
use crate::features::{GroupSelection, NormalizationStats};
use crate::graph::GraphHyperParams;

pub const CHECKPOINT_FILE: &str = "model.ckpt.json";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A named parameter, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub hyperparams: GraphHyperParams,
    pub ablation: AblationConfig,
    pub groups: GroupSelection,
    pub shape: ModelShape,
    pub layout_hash: String,
    pub normalization: NormalizationStats,
    /// Seed the parameters were initialized from.
    pub seed: u64,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(
        model: &MugRep,
        hyperparams: GraphHyperParams,
        groups: GroupSelection,
        layout_hash: String,
        normalization: NormalizationStats,
        seed: u64,
    ) -> Self {
        let store = model.params();
        let tensors = store
            .ids()
            .map(|id| {
                let m = store.value(id);
                Tensor {
                    name: store.name(id).to_string(),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    data: m.transpose().as_slice().to_vec(),
                }
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            hyperparams,
            ablation: model.ablation(),
            groups,
            shape: *model.shape(),
            layout_hash,
            normalization,
            seed,
            tensors,
        }
    }

    /// Rebuilds the model; every tensor must match the architecture by name and shape.
    pub fn model(&self) -> Result<MugRep> {
        if self.version != CHECKPOINT_VERSION {
            return Err(MugrepError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let mut model = MugRep::new(self.shape, self.ablation, self.seed)?;
        let store = model.params_mut();
        if store.len() != self.tensors.len() {
            return Err(MugrepError::Checkpoint(format!(
                "expected {} tensors, found {}",
                store.len(),
                self.tensors.len()
            )));
        }
        for t in &self.tensors {
            let id = store
                .find(&t.name)
                .ok_or_else(|| MugrepError::Checkpoint(format!("unexpected tensor {}", t.name)))?;
            let target = store.value_mut(id);
            if (target.nrows(), target.ncols()) != (t.rows, t.cols) || t.data.len() != t.rows * t.cols {
                return Err(MugrepError::Checkpoint(format!(
                    "tensor {} has shape {}x{}, expected {}x{}",
                    t.name,
                    t.rows,
                    t.cols,
                    target.nrows(),
                    target.ncols()
                )));
            }
            *target = Matrix::from_row_slice(t.rows, t.cols, &t.data);
        }
        Ok(model)
    }

    /// Errors unless the checkpoint was trained on features with this layout hash.
    pub fn check_layout(&self, layout_hash: &str) -> Result<()> {
        if self.layout_hash != layout_hash {
            return Err(MugrepError::LayoutMismatch {
                expected: self.layout_hash.clone(),
                found: layout_hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| MugrepError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| MugrepError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
