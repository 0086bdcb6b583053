use serde::{Deserialize, Serialize};

use crate::data::{split_chronological, Dataset, DatasetSplit, Day, EventId};
use crate::error::Result;
use crate::features::{fit_normalizer, CommunityBlocks, FeatureBuilder, GroupSelection, NormalizationStats};
use crate::graph::{build_hetero_edges, EdgeType, GraphHyperParams, HeteroCommunityEdges};
use crate::model::{AblationConfig, Checkpoint, ModelDims, ModelWorld, SubjectQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    /// Chosen on validation loss of the default city.
    pub batch_size: usize,
    pub seed: u64,
    pub ablation: AblationConfig,
    pub groups: GroupSelection,
    pub hyperparams: GraphHyperParams,
    pub dims: ModelDims,
    pub validation_days: Day,
    pub test_days: Day,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            patience_epochs: 30,
            max_epochs: 200,
            batch_size: 16,
            seed: 0,
            ablation: AblationConfig::FULL,
            groups: GroupSelection::ALL,
            hyperparams: GraphHyperParams::default(),
            dims: ModelDims::default(),
            validation_days: 30,
            test_days: 150,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(crate::MugrepError::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.patience_epochs == 0 {
            return bad("patience_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        self.hyperparams.validate()
    }
}

/// Hetero edges for the selected auxiliary groups only; a dropped group
/// loses its edge set along with its feature slots.
pub fn hetero_edges_for(
    dataset: &Dataset,
    blocks: &CommunityBlocks,
    groups: GroupSelection,
    sim_quantile: f64,
) -> Result<HeteroCommunityEdges> {
    let sims: Vec<(EdgeType, Vec<Vec<f64>>)> = groups
        .auxiliary()
        .into_iter()
        .filter_map(|g| EdgeType::from_group(g).map(|t| (t, blocks.similarity(g))))
        .collect();
    let typed: Vec<(EdgeType, &[Vec<f64>])> = sims.iter().map(|(t, v)| (*t, v.as_slice())).collect();
    let ids: Vec<_> = dataset.communities.iter().map(|c| c.id).collect();
    build_hetero_edges(&ids, &typed, sim_quantile)
}

/// A dataset split, featurized with train-only normalization and wired into graphs.
pub struct Experiment {
    pub split: DatasetSplit,
    pub features: FeatureBuilder,
    pub normalization: NormalizationStats,
    pub world: ModelWorld,
}

impl Experiment {
    pub fn prepare(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        Self::with_blocks(dataset, CommunityBlocks::build(dataset), config)
    }

    pub fn with_blocks(dataset: &Dataset, blocks: CommunityBlocks, config: &TrainConfig) -> Result<Self> {
        Self::build(dataset, blocks, config, None)
    }

    /// Same split as training, reusing the checkpoint's normalization and
    /// graph settings; fails if the feature layout differs.
    pub fn for_checkpoint(dataset: &Dataset, checkpoint: &Checkpoint, config: &TrainConfig) -> Result<Self> {
        let config = TrainConfig {
            hyperparams: checkpoint.hyperparams,
            groups: checkpoint.groups,
            ablation: checkpoint.ablation,
            ..config.clone()
        };
        Self::build(dataset, CommunityBlocks::build(dataset), &config, Some(checkpoint))
    }

    fn build(
        dataset: &Dataset,
        blocks: CommunityBlocks,
        config: &TrainConfig,
        checkpoint: Option<&Checkpoint>,
    ) -> Result<Self> {
        config.validate()?;
        let split = split_chronological(&dataset.events, config.validation_days, config.test_days)?;
        let hetero = hetero_edges_for(dataset, &blocks, config.groups, config.hyperparams.sim_quantile)?;
        let features = FeatureBuilder::with_blocks(dataset, blocks, config.groups);
        let raw = features.assemble_all(&dataset.events)?;
        let normalization = match checkpoint {
            Some(c) => {
                c.check_layout(&features.layout().hash())?;
                c.normalization.clone()
            }
            None => {
                let train_rows: Vec<Vec<f64>> = split.train.iter().map(|&id| raw[id as usize].clone()).collect();
                fit_normalizer(features.layout(), &train_rows)?
            }
        };
        let x = raw.iter().map(|r| normalization.apply(r)).collect();
        let world = ModelWorld::new(config.hyperparams, &dataset.events, x, &dataset.communities, hetero)?;
        Ok(Experiment {
            split,
            features,
            normalization,
            world,
        })
    }

    pub fn subjects(&self, ids: &[EventId]) -> Result<Vec<SubjectQuery>> {
        ids.iter().map(|&id| self.world.event_subject(id)).collect()
    }

    pub fn targets(&self, ids: &[EventId]) -> Vec<f64> {
        ids.iter().map(|&id| self.world.event_price(id)).collect()
    }
}
