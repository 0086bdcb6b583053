//! Event graph and community graphs.

mod community;
mod event;

use serde::{Deserialize, Serialize};

use crate::data::Day;
use crate::error::{MugrepError, Result};

pub use community::{
    active_intra_events, build_hetero_edges, nearest_rank_quantile, pairwise_distance, EdgeSet, EdgeType,
    HeteroCommunityEdges, IntraIndex, COMMUNITY_EDGES_FILE, INTRA_INDEX_FILE,
};
pub use event::{EventGraph, EventNode, Subgraph, EVENT_GRAPH_FILE, EVENT_GRAPH_JSON_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphHyperParams {
    pub eps_d_m: f64,
    pub eps_tau_days: Day,
    pub n_e: usize,
    pub l_e: usize,
    pub n_c: usize,
    pub l_c: usize,
    pub sim_quantile: f64,
}

impl Default for GraphHyperParams {
    fn default() -> Self {
        GraphHyperParams {
            eps_d_m: 500.0,
            eps_tau_days: 90,
            n_e: 5,
            l_e: 2,
            n_c: 5,
            l_c: 1,
            sim_quantile: 0.001,
        }
    }
}

impl GraphHyperParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_d_m > 0.0
            && self.eps_tau_days > 0
            && self.n_e > 0
            && self.l_e > 0
            && self.n_c > 0
            && self.l_c > 0
            && self.sim_quantile > 0.0
            && self.sim_quantile < 1.0;
        if ok {
            Ok(())
        } else {
            Err(MugrepError::InvalidConfig(format!(
                "graph hyperparameters out of range: {self:?}"
            )))
        }
    }
}
