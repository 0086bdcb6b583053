//! Model and feature ablations run side by side on one dataset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{baseline_dnn, baseline_lr, evaluate, report_for, train, Experiment, HistoricalAverage, TrainConfig};
use crate::data::Dataset;
use crate::error::{MugrepError, Result};
use crate::features::{CommunityBlocks, FeatureGroup, GroupSelection};
use crate::model::AblationConfig;

pub const ABLATION_TABLE_FILE: &str = "ablation_table.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoEvt,
    NoCom,
    NoMt,
    Basic,
    NoGeo,
    NoVis,
    NoMob,
    NoPop,
    Ha,
    Lr,
    Dnn,
}

impl Variant {
    pub const MODEL: [Variant; 4] = [Variant::Full, Variant::NoEvt, Variant::NoCom, Variant::NoMt];
    pub const FEATURE: [Variant; 5] = [
        Variant::Basic,
        Variant::NoGeo,
        Variant::NoVis,
        Variant::NoMob,
        Variant::NoPop,
    ];
    pub const BASELINE: [Variant; 3] = [Variant::Ha, Variant::Lr, Variant::Dnn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoEvt => "noEvt",
            Variant::NoCom => "noCom",
            Variant::NoMt => "noMT",
            Variant::Basic => "Basic",
            Variant::NoGeo => "noGeo",
            Variant::NoVis => "noVis",
            Variant::NoMob => "noMob",
            Variant::NoPop => "noPop",
            Variant::Ha => "HA",
            Variant::Lr => "LR",
            Variant::Dnn => "DNN",
        }
    }

    /// The nine MugRep variants, without baselines.
    pub fn standard() -> Vec<Variant> {
        Self::MODEL.iter().chain(&Self::FEATURE).copied().collect()
    }

    /// Module switches and feature groups for this variant on top of `base`.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            Variant::Full | Variant::Ha | Variant::Lr | Variant::Dnn => {}
            Variant::NoEvt => c.ablation = AblationConfig::NO_EVT,
            Variant::NoCom => c.ablation = AblationConfig::NO_COM,
            Variant::NoMt => c.ablation = AblationConfig::NO_MT,
            Variant::Basic => {
                c.groups = GroupSelection::NONE;
                c.ablation.use_community_module = false;
            }
            Variant::NoGeo => c.groups = c.groups.without(FeatureGroup::Geographical),
            Variant::NoVis => c.groups = c.groups.without(FeatureGroup::Visit),
            Variant::NoMob => c.groups = c.groups.without(FeatureGroup::Mobility),
            Variant::NoPop => c.groups = c.groups.without(FeatureGroup::Population),
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = MugrepError;

    fn from_str(s: &str) -> Result<Self> {
        let all = Self::MODEL.iter().chain(&Self::FEATURE).chain(&Self::BASELINE);
        all.copied()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MugrepError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    pub mae: f64,
    pub mape: f64,
    pub rmse: f64,
    pub n_evaluated: usize,
    /// Empty for baselines that are not trained by gradient descent.
    pub best_epoch: Option<usize>,
}

/// Runs every `(variant, seed)` pair and reports test-split metrics,
/// variant-major.
pub fn run_ablation_suite(
    dataset: &Dataset,
    base: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let blocks = CommunityBlocks::build(dataset);
    let mut cache: Vec<(GroupSelection, Experiment)> = Vec::new();
    let mut rows = Vec::with_capacity(variants.len() * seeds.len());
    for &variant in variants {
        for &seed in seeds {
            let config = TrainConfig {
                seed,
                ..variant.configure(base)
            };
            let pos = match cache.iter().position(|(g, _)| *g == config.groups) {
                Some(p) => p,
                None => {
                    cache.push((
                        config.groups,
                        Experiment::with_blocks(dataset, blocks.clone(), &config)?,
                    ));
                    cache.len() - 1
                }
            };
            let exp = &cache[pos].1;
            let (report, best_epoch) = match variant {
                Variant::Ha => {
                    let ha = HistoricalAverage::new(&dataset.events);
                    let pred = exp
                        .split
                        .test
                        .iter()
                        .map(|&id| {
                            let e = &dataset.events[id as usize];
                            ha.predict(e.community_id, e.date).ok_or(MugrepError::EmptyBatch)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    (report_for(&pred, &exp.split.test, exp, dataset)?, None)
                }
                Variant::Lr => {
                    let m = baseline_lr(exp, &exp.split.train)?;
                    let pred: Vec<f64> = exp
                        .split
                        .test
                        .iter()
                        .map(|&id| m.predict(exp.world.event_x(id)))
                        .collect();
                    (report_for(&pred, &exp.split.test, exp, dataset)?, None)
                }
                Variant::Dnn => {
                    let out = baseline_dnn(exp, &config)?;
                    (evaluate(&out.model, exp, dataset)?, Some(out.best_epoch))
                }
                _ => {
                    let out = train(exp, &config)?;
                    (evaluate(&out.model, exp, dataset)?, Some(out.best_epoch))
                }
            };
            rows.push(AblationRow {
                variant,
                seed,
                mae: report.mae,
                mape: report.mape,
                rmse: report.rmse,
                n_evaluated: report.n_evaluated,
                best_epoch,
            });
        }
    }
    Ok(rows)
}

pub fn write_ablation_table(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "seed", "mae", "mape", "rmse", "n_evaluated", "best_epoch"])?;
    for r in rows {
        w.write_record([
            r.variant.name().to_string(),
            r.seed.to_string(),
            r.mae.to_string(),
            r.mape.to_string(),
            r.rmse.to_string(),
            r.n_evaluated.to_string(),
            r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| MugrepError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in Variant::MODEL.iter().chain(&Variant::FEATURE).chain(&Variant::BASELINE) {
            assert_eq!(v.name().parse::<Variant>().unwrap(), *v);
        }
        assert_eq!("NOEVT".parse::<Variant>().unwrap(), Variant::NoEvt);
        assert!("noFoo".parse::<Variant>().is_err());
    }

    #[test]
    fn feature_variants_drop_one_group() {
        let base = TrainConfig::default();
        let c = Variant::NoGeo.configure(&base);
        assert!(!c.groups.geographical && c.groups.visit && c.groups.mobility && c.groups.population);
        assert_eq!(c.ablation, AblationConfig::FULL);
    }

    #[test]
    fn basic_disables_community_module() {
        let c = Variant::Basic.configure(&TrainConfig::default());
        assert_eq!(c.groups, GroupSelection::NONE);
        assert!(!c.ablation.use_community_module);
        assert!(c.ablation.use_event_module && c.ablation.use_multitask);
    }
}
