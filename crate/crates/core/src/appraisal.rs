//! A trained model frozen together with its dataset, answering community
//! lookups and what-if valuations. Shared by the CLI and the HTTP service.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_dataset, CommunityId, Dataset, Day, DistrictId, EstateAttributes};
use crate::error::{MugrepError, Result};
use crate::features::{CommunityBlocks, FeatureBuilder, HistoricalPriceStats};
use crate::geo::Point;
use crate::model::{Checkpoint, ModelWorld, MugRep};
use crate::train::hetero_edges_for;

/// Cap on community search results.
pub const SEARCH_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppraisalRequest {
    pub community_id: CommunityId,
    /// Defaults to the day after the newest transaction on record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation_date: Option<Day>,
    pub attributes: EstateAttributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppraisalContext {
    pub valuation_date: Day,
    pub district_id: DistrictId,
    /// Earlier transactions attached to the subject in the event graph.
    pub event_neighbors: usize,
    /// Transactions inside the community's active window.
    pub community_window: usize,
    pub history_missing: bool,
    pub checkpoint_version: u32,
    pub layout_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppraisalResponse {
    /// 10,000 CNY per square meter.
    pub unit_price_estimate: f64,
    /// Unit price times area.
    pub total_price: f64,
    pub context: AppraisalContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub id: CommunityId,
    pub name: String,
    pub district_id: DistrictId,
    pub centroid: Point,
    pub developer: String,
    pub completion_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityDetail {
    pub id: CommunityId,
    pub name: String,
    pub district_id: DistrictId,
    pub centroid: Point,
    pub developer: String,
    pub completion_year: f64,
    pub building_count: f64,
    pub estate_count: f64,
    pub property_fee: f64,
    /// Price statistics over the quarter before `as_of`.
    pub recent_prices: HistoricalPriceStats,
    pub as_of: Day,
    pub transaction_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub checkpoint_version: u32,
    pub n_communities: usize,
    pub n_events: usize,
}

/// Immutable after construction; every query is a pure function of its input.
pub struct AppraisalEngine {
    dataset: Dataset,
    features: FeatureBuilder,
    checkpoint: Checkpoint,
    model: MugRep,
    world: ModelWorld,
    default_date: Day,
}

impl AppraisalEngine {
    pub fn load(dataset_dir: &Path, checkpoint_path: &Path) -> Result<Self> {
        Self::new(load_dataset(dataset_dir)?, Checkpoint::read(checkpoint_path)?)
    }

    pub fn new(dataset: Dataset, checkpoint: Checkpoint) -> Result<Self> {
        let features = FeatureBuilder::with_blocks(&dataset, CommunityBlocks::build(&dataset), checkpoint.groups);
        checkpoint.check_layout(&features.layout().hash())?;
        let model = checkpoint.model()?;
        let hetero = hetero_edges_for(
            &dataset,
            features.blocks(),
            checkpoint.groups,
            checkpoint.hyperparams.sim_quantile,
        )?;
        let x = features
            .assemble_all(&dataset.events)?
            .iter()
            .map(|r| checkpoint.normalization.apply(r))
            .collect();
        let world = ModelWorld::new(checkpoint.hyperparams, &dataset.events, x, &dataset.communities, hetero)?;
        let default_date = dataset.latest_date().map_or(0, |d| d + 1);
        Ok(AppraisalEngine {
            dataset,
            features,
            checkpoint,
            model,
            world,
            default_date,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn default_valuation_date(&self) -> Day {
        self.default_date
    }

    pub fn info(&self) -> EngineInfo {
        EngineInfo {
            checkpoint_version: self.checkpoint.version,
            n_communities: self.dataset.communities.len(),
            n_events: self.dataset.events.len(),
        }
    }

    /// Case-insensitive substring search on names, ordered by match
    /// position then id, at most [`SEARCH_LIMIT`] results.
    pub fn search(&self, query: &str) -> Result<Vec<CommunitySummary>> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return Err(MugrepError::EmptyQuery);
        }
        let mut hits: Vec<(usize, CommunityId, usize)> = self
            .dataset
            .communities
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.name.to_lowercase().find(&q).map(|at| (at, c.id, i)))
            .collect();
        hits.sort_unstable();
        Ok(hits
            .into_iter()
            .take(SEARCH_LIMIT)
            .map(|(_, _, i)| {
                let c = &self.dataset.communities[i];
                CommunitySummary {
                    id: c.id,
                    name: c.name.clone(),
                    district_id: c.district_id,
                    centroid: c.centroid,
                    developer: c.profile.developer.clone(),
                    completion_year: c.profile.completion_year,
                }
            })
            .collect())
    }

    pub fn community(&self, id: CommunityId) -> Result<CommunityDetail> {
        let c = self.dataset.community(id).ok_or(MugrepError::UnknownCommunity(id))?;
        let as_of = self.default_date;
        Ok(CommunityDetail {
            id,
            name: c.name.clone(),
            district_id: c.district_id,
            centroid: c.centroid,
            developer: c.profile.developer.clone(),
            completion_year: c.profile.completion_year,
            building_count: c.profile.building_count,
            estate_count: c.profile.estate_count,
            property_fee: c.profile.property_fee,
            recent_prices: self.features.history().stats(id, as_of),
            as_of,
            transaction_count: self.features.history().count_before(id, as_of),
        })
    }

    pub fn appraise(&self, request: &AppraisalRequest) -> Result<AppraisalResponse> {
        let id = request.community_id;
        if self.dataset.community(id).is_none() {
            return Err(MugrepError::UnknownCommunity(id));
        }
        let date = request.valuation_date.unwrap_or(self.default_date);
        let raw = self.features.assemble(id, date, &request.attributes)?;
        let subject = self
            .world
            .virtual_subject(self.checkpoint.normalization.apply(&raw), id, date)?;
        let context = AppraisalContext {
            valuation_date: date,
            district_id: subject.district_id,
            event_neighbors: subject.neighbors.len(),
            community_window: self.world.intra.active_before(id, date, &self.world.hyper).len(),
            history_missing: self.features.history().stats(id, date).missing,
            checkpoint_version: self.checkpoint.version,
            layout_hash: self.checkpoint.layout_hash.clone(),
        };
        let unit = self.model.predict(&self.world, std::slice::from_ref(&subject))?[0];
        if !unit.is_finite() {
            return Err(MugrepError::NonFiniteEstimate(unit));
        }
        let area = request
            .attributes
            .get("area")
            .and_then(|v| v.as_number())
            .ok_or_else(|| MugrepError::InvalidAttribute {
                field: "area".into(),
                value: "<missing>".into(),
            })?;
        Ok(AppraisalResponse {
            unit_price_estimate: unit,
            total_price: unit * area,
            context,
        })
    }

    /// Digest of everything a request could read: parameters, features and
    /// history. Constant over the engine's lifetime.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.checkpoint.tensors {
            h.update(t.name.as_bytes());
            for v in &t.data {
                h.update(v.to_le_bytes());
            }
        }
        for id in self.model.params().ids() {
            for v in self.model.params().value(id).iter() {
                h.update(v.to_le_bytes());
            }
        }
        for e in &self.dataset.events {
            h.update(e.id.to_le_bytes());
            h.update(e.date.to_le_bytes());
            h.update(e.price.unwrap_or(f64::NAN).to_le_bytes());
            for v in self.world.event_x(e.id) {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
