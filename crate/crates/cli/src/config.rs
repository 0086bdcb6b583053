use std::path::Path;

use serde::{Deserialize, Serialize};

use mugrep::graph::GraphHyperParams;
use mugrep::synth::GeneratorConfig;
use mugrep::train::TrainConfig;

use crate::CliError;

/// One TOML file layered over the built-in defaults:
///
/// ```toml
/// [generator]
/// n_transactions = 2000
///
/// [graph]
/// n_e = 3
///
/// [train]
/// max_epochs = 50
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub generator: GeneratorConfig,
    /// Overrides `train.hyperparams` when present.
    pub graph: Option<GraphHyperParams>,
    pub train: TrainConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(graph) = config.graph {
            config.train.hyperparams = graph;
        }
        Ok(config)
    }

    /// Applies a `--seed` flag to every seeded stage.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.generator.seed = s;
            self.train.seed = s;
        }
        self
    }
}
