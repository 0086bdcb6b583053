//! Feature construction.
//!
//! The per-event input concatenates, in layout order: estate profile,
//! community profile, temporal features (day, weekday and the 90-day price
//! history of the community), then the geographical, visit, mobility and
//! population groups. The last four are evaluated once per community at its
//! centroid and double as the community similarity vectors used for the
//! heterogeneous community graph.
//!
//! The community itself is not part of the vector; the model looks up a
//! learned embedding by community position instead.

mod geographic;
mod history;
mod layout;
mod mobility;
mod normalize;
mod population;
mod visit;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{
    validate_attributes, AttributeKind, Community, CommunityId, Dataset, Day, EstateAttributes, Schema,
    TransactionEvent,
};
use crate::error::{MugrepError, Result};

pub use geographic::{geographical_features, FacilityIndex, GEO_WIDTH, NEAREST_CAP_M};
pub use history::{historical_price_stats, HistoricalPriceStats, PriceHistory, HISTORY_WINDOW_DAYS};
pub use layout::{FeatureGroup, FeatureLayout, GroupSelection, Slot, SlotKind, FEATURES_FILE};
pub use mobility::{mobility_features, mobility_slots, mobility_width, ATTRIBUTION_RADIUS_M};
pub use normalize::{fit_normalizer, zscore_columns, NormalizationStats, STD_FLOOR};
pub use population::{population_features, population_slots, population_width};
pub use visit::{visit_features, CheckinIndex, VISIT_WIDTH};

/// Radius for "nearby" facilities and check-ins.
pub const NEARBY_RADIUS_M: f64 = 500.0;

/// Raw auxiliary group outputs per community, indexed like
/// `Dataset::communities`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityBlocks {
    pub geographical: Vec<Vec<f64>>,
    pub visit: Vec<Vec<f64>>,
    pub mobility: Vec<Vec<f64>>,
    pub population: Vec<Vec<f64>>,
}

impl CommunityBlocks {
    pub fn build(dataset: &Dataset) -> Self {
        let schema = &dataset.schema;
        let facilities = FacilityIndex::new(schema, &dataset.records.facilities, NEARBY_RADIUS_M);
        let checkins = CheckinIndex::new(&dataset.records.checkins, NEARBY_RADIUS_M);
        let (geographical, visit) = dataset
            .communities
            .par_iter()
            .map(|c| {
                (
                    facilities.features(&c.centroid, NEARBY_RADIUS_M),
                    checkins.features(&c.centroid, NEARBY_RADIUS_M),
                )
            })
            .unzip();
        CommunityBlocks {
            geographical,
            visit,
            mobility: mobility_features(
                schema,
                &dataset.communities,
                &dataset.records.trips,
                ATTRIBUTION_RADIUS_M,
            ),
            population: population_features(schema, &dataset.communities, &dataset.records.residents),
        }
    }

    /// Raw vectors of one auxiliary group. Panics for the three always-on groups.
    pub fn group(&self, group: FeatureGroup) -> &[Vec<f64>] {
        match group {
            FeatureGroup::Geographical => &self.geographical,
            FeatureGroup::Visit => &self.visit,
            FeatureGroup::Mobility => &self.mobility,
            FeatureGroup::Population => &self.population,
            other => panic!("{} is not a community-level group", other.name()),
        }
    }

    /// Similarity vectors of one group, z-scored across communities.
    pub fn similarity(&self, group: FeatureGroup) -> Vec<Vec<f64>> {
        zscore_columns(self.group(group))
    }
}

/// Assembles raw (unnormalized) input vectors against a fixed layout.
pub struct FeatureBuilder {
    schema: Schema,
    layout: FeatureLayout,
    communities: Vec<Community>,
    position: HashMap<CommunityId, usize>,
    n_districts: usize,
    history: PriceHistory,
    blocks: CommunityBlocks,
}

impl FeatureBuilder {
    pub fn new(dataset: &Dataset, groups: GroupSelection) -> Self {
        Self::with_blocks(dataset, CommunityBlocks::build(dataset), groups)
    }

    /// Reuse precomputed community blocks, e.g. across ablation variants.
    pub fn with_blocks(dataset: &Dataset, blocks: CommunityBlocks, groups: GroupSelection) -> Self {
        FeatureBuilder {
            schema: dataset.schema.clone(),
            layout: FeatureLayout::new(&dataset.schema, dataset.n_districts(), groups),
            communities: dataset.communities.clone(),
            position: dataset.community_index(),
            n_districts: dataset.n_districts(),
            history: PriceHistory::new(&dataset.events),
            blocks,
        }
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &CommunityBlocks {
        &self.blocks
    }

    pub fn history(&self) -> &PriceHistory {
        &self.history
    }

    pub fn community_position(&self, id: CommunityId) -> Option<usize> {
        self.position.get(&id).copied()
    }

    /// Input vector of a property in `community_id` valued on `date`.
    /// Only transactions strictly before `date` enter the temporal group.
    pub fn assemble(&self, community_id: CommunityId, date: Day, attributes: &EstateAttributes) -> Result<Vec<f64>> {
        validate_attributes(&self.schema, attributes)?;
        let pos = self
            .community_position(community_id)
            .ok_or(MugrepError::UnknownCommunity(community_id))?;
        let community = &self.communities[pos];
        let mut x = Vec::with_capacity(self.layout.len());

        for spec in &self.schema.estate_attributes {
            let value = &attributes[&spec.name];
            match spec.kind {
                AttributeKind::Numeric => x.push(value.as_number().unwrap_or_default()),
                AttributeKind::Categorical => {
                    let k = value.as_category().and_then(|c| spec.index_of(c));
                    x.extend((0..spec.values.len()).map(|i| f64::from(Some(i) == k)));
                }
            }
        }

        let profile = &community.profile;
        let dev = self
            .schema
            .developers
            .iter()
            .position(|d| *d == profile.developer)
            .ok_or_else(|| MugrepError::InvalidAttribute {
                field: "developer".into(),
                value: profile.developer.clone(),
            })?;
        x.extend((0..self.schema.developers.len()).map(|i| f64::from(i == dev)));
        x.extend([
            profile.completion_year,
            profile.building_count,
            profile.estate_count,
            profile.property_fee,
        ]);
        x.extend((0..self.n_districts).map(|m| f64::from(m == community.district_id as usize)));

        x.push(date as f64);
        let weekday = date.rem_euclid(7) as usize;
        x.extend((0..7).map(|d| f64::from(d == weekday)));
        let h = self.history.stats(community_id, date);
        x.extend([h.mean, h.variance, h.max, h.min, h.count as f64, f64::from(h.missing)]);

        for group in self.layout.groups.auxiliary() {
            x.extend_from_slice(&self.blocks.group(group)[pos]);
        }
        debug_assert_eq!(x.len(), self.layout.len());
        Ok(x)
    }

    pub fn assemble_event(&self, event: &TransactionEvent) -> Result<Vec<f64>> {
        self.assemble(event.community_id, event.date, &event.attributes)
    }

    pub fn assemble_all(&self, events: &[TransactionEvent]) -> Result<Vec<Vec<f64>>> {
        events.par_iter().map(|e| self.assemble_event(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AttributeValue;
    use crate::synth::{generate_dataset, tests::small};

    #[test]
    fn layout_length_is_sum_of_groups() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let b = FeatureBuilder::new(&d, GroupSelection::ALL);
        let layout = b.layout();
        let total: usize = FeatureGroup::ALL
            .iter()
            .filter_map(|g| layout.group_range(*g))
            .map(|r| r.len())
            .sum();
        assert_eq!(total, layout.len());
        assert_eq!(layout.group_range(FeatureGroup::Geographical).unwrap().len(), GEO_WIDTH);
        assert_eq!(layout.group_range(FeatureGroup::Visit).unwrap().len(), VISIT_WIDTH);
        assert_eq!(
            layout.group_range(FeatureGroup::Mobility).unwrap().len(),
            mobility_width(&d.schema)
        );
        assert_eq!(
            layout.group_range(FeatureGroup::Population).unwrap().len(),
            population_width(&d.schema)
        );
        for e in d.events.iter().take(50) {
            assert_eq!(b.assemble_event(e).unwrap().len(), layout.len());
        }
    }

    #[test]
    fn area_change_touches_only_area() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let b = FeatureBuilder::new(&d, GroupSelection::ALL);
        let e = &d.events[d.events.len() / 2];
        let mut attrs = e.attributes.clone();
        let area = attrs["area"].as_number().unwrap();
        attrs.insert("area".into(), AttributeValue::Number(area + 17.0));
        let x1 = b.assemble_event(e).unwrap();
        let x2 = b.assemble(e.community_id, e.date, &attrs).unwrap();
        let slot = b.layout().index_of(FeatureGroup::Profile, "area").unwrap();
        for (i, (a, c)) in x1.iter().zip(&x2).enumerate() {
            if i == slot {
                assert_eq!(c - a, 17.0);
            } else {
                assert_eq!(a, c, "slot {}", b.layout().slots[i].name);
            }
        }
    }

    #[test]
    fn first_event_has_no_history() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let b = FeatureBuilder::new(&d, GroupSelection::ALL);
        let x = b.assemble_event(&d.events[0]).unwrap();
        let flag = b.layout().index_of(FeatureGroup::Temporal, "history.missing").unwrap();
        assert_eq!(x[flag], 1.0);
    }

    #[test]
    fn unknown_category_is_an_error() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let b = FeatureBuilder::new(&d, GroupSelection::ALL);
        let e = &d.events[0];
        let mut attrs = e.attributes.clone();
        attrs.insert("heating".into(), AttributeValue::Category("geothermal".into()));
        assert!(matches!(
            b.assemble(e.community_id, e.date, &attrs),
            Err(MugrepError::InvalidAttribute { field, .. }) if field == "heating"
        ));
        assert!(matches!(
            b.assemble(999_999, e.date, &e.attributes),
            Err(MugrepError::UnknownCommunity(999_999))
        ));
    }

    #[test]
    fn dropped_group_leaves_no_slots() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let full = FeatureBuilder::new(&d, GroupSelection::ALL);
        let no_geo = FeatureBuilder::with_blocks(
            &d,
            full.blocks().clone(),
            GroupSelection::ALL.without(FeatureGroup::Geographical),
        );
        assert!(no_geo.layout().group_range(FeatureGroup::Geographical).is_none());
        assert_eq!(no_geo.layout().len(), full.layout().len() - GEO_WIDTH);
        assert_ne!(no_geo.layout().hash(), full.layout().hash());
    }

    #[test]
    fn manifest_round_trips() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let layout = FeatureLayout::new(&d.schema, d.n_districts(), GroupSelection::ALL);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(FEATURES_FILE);
        layout.write_manifest(&path).unwrap();
        assert_eq!(FeatureLayout::read_manifest(&path).unwrap(), layout);
    }
}
