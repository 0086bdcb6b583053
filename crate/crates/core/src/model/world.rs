use std::collections::HashMap;

use crate::data::{Community, CommunityId, Day, DistrictId, EventId, TransactionEvent};
use crate::error::{MugrepError, Result};
use crate::geo::Point;
use crate::graph::{EventGraph, GraphHyperParams, HeteroCommunityEdges, IntraIndex};

/// A property to appraise, with its event neighborhood already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectQuery {
    /// Normalized feature vector.
    pub x: Vec<f64>,
    pub community_id: CommunityId,
    pub district_id: DistrictId,
    pub valuation_date: Day,
    /// Direct event-graph neighbors, all strictly earlier than `valuation_date`.
    pub neighbors: Vec<EventId>,
}

/// Everything a forward pass reads besides parameters: graphs, normalized
/// event features and known prices.
#[derive(Debug, Clone)]
pub struct ModelWorld {
    pub hyper: GraphHyperParams,
    pub graph: EventGraph,
    pub intra: IntraIndex,
    pub hetero: HeteroCommunityEdges,
    x: Vec<Vec<f64>>,
    price: Vec<f64>,
    event_community: Vec<usize>,
    community_ids: Vec<CommunityId>,
    position: HashMap<CommunityId, usize>,
    district: Vec<DistrictId>,
    centroid: Vec<Point>,
}

impl ModelWorld {
    /// `events` must carry ids `0..n` in order and all be priced; `x[i]` is
    /// the normalized feature row of event `i`.
    pub fn new(
        hyper: GraphHyperParams,
        events: &[TransactionEvent],
        x: Vec<Vec<f64>>,
        communities: &[Community],
        hetero: HeteroCommunityEdges,
    ) -> Result<Self> {
        hyper.validate()?;
        if x.len() != events.len() {
            return Err(MugrepError::ShapeMismatch(format!(
                "{} feature rows for {} events",
                x.len(),
                events.len()
            )));
        }
        let position: HashMap<CommunityId, usize> = communities.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        let mut price = Vec::with_capacity(events.len());
        let mut event_community = Vec::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            if e.id as usize != i {
                return Err(MugrepError::DuplicateEvent(e.id));
            }
            price.push(e.price.ok_or(MugrepError::UnknownEvent(e.id))?);
            event_community.push(
                *position
                    .get(&e.community_id)
                    .ok_or(MugrepError::UnknownCommunity(e.community_id))?,
            );
        }
        Ok(ModelWorld {
            graph: EventGraph::build(&hyper, events)?,
            intra: IntraIndex::build(events),
            hyper,
            hetero,
            x,
            price,
            event_community,
            community_ids: communities.iter().map(|c| c.id).collect(),
            position,
            district: communities.iter().map(|c| c.district_id).collect(),
            centroid: communities.iter().map(|c| c.centroid).collect(),
        })
    }

    pub fn n_events(&self) -> usize {
        self.x.len()
    }

    pub fn n_communities(&self) -> usize {
        self.community_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn n_districts(&self) -> usize {
        self.district.iter().map(|&d| d as usize + 1).max().unwrap_or(0)
    }

    pub fn event_x(&self, id: EventId) -> &[f64] {
        &self.x[id as usize]
    }

    pub fn event_price(&self, id: EventId) -> f64 {
        self.price[id as usize]
    }

    pub(crate) fn event_community_position(&self, id: EventId) -> usize {
        self.event_community[id as usize]
    }

    pub fn community_position(&self, id: CommunityId) -> Result<usize> {
        self.position.get(&id).copied().ok_or(MugrepError::UnknownCommunity(id))
    }

    pub fn community_id_at(&self, position: usize) -> CommunityId {
        self.community_ids[position]
    }

    pub fn district_of(&self, community_id: CommunityId) -> Result<DistrictId> {
        Ok(self.district[self.community_position(community_id)?])
    }

    /// Query for a known event, valued on its own date.
    pub fn event_subject(&self, id: EventId) -> Result<SubjectQuery> {
        let node = self.graph.node(id).ok_or(MugrepError::UnknownEvent(id))?;
        let community = self.event_community[id as usize];
        Ok(SubjectQuery {
            x: self.x[id as usize].clone(),
            community_id: self.community_ids[community],
            district_id: self.district[community],
            valuation_date: node.date,
            neighbors: self.graph.predecessors(id)?.to_vec(),
        })
    }

    /// Query for a hypothetical property placed at its community centroid.
    pub fn virtual_subject(&self, x: Vec<f64>, community_id: CommunityId, valuation_date: Day) -> Result<SubjectQuery> {
        let pos = self.community_position(community_id)?;
        Ok(SubjectQuery {
            x,
            community_id,
            district_id: self.district[pos],
            valuation_date,
            neighbors: self.graph.attach_virtual(&self.centroid[pos], valuation_date),
        })
    }
}
