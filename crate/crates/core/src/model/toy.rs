//! Small random worlds for gradient checks, oracles and examples.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ModelWorld;
use crate::data::{Community, CommunityProfile, TransactionEvent};
use crate::error::Result;
use crate::geo::Point;
use crate::graph::{build_hetero_edges, EdgeType, GraphHyperParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub n_events: usize,
    pub n_communities: usize,
    pub n_districts: usize,
    pub n_features: usize,
    /// Side of the square the communities are scattered over, in meters.
    pub extent_m: f64,
    pub date_span: i64,
    /// Similarity quantile for the hetero edges; toy worlds need a large one.
    pub sim_quantile: f64,
    pub hyper: GraphHyperParams,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_events: 20,
            n_communities: 6,
            n_districts: 3,
            n_features: 5,
            extent_m: 600.0,
            date_span: 120,
            sim_quantile: 0.3,
            hyper: GraphHyperParams::default(),
        }
    }
}

/// Random events with prices in `[1, 5)` and standard-normal features.
/// Returns the world along with its events.
pub fn toy_world(config: &ToyConfig, seed: u64) -> Result<(ModelWorld, Vec<TransactionEvent>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let communities: Vec<Community> = (0..config.n_communities)
        .map(|i| Community {
            id: 100 + i as u32,
            name: format!("Toy {i}"),
            centroid: Point {
                x: rng.random_range(0.0..config.extent_m),
                y: rng.random_range(0.0..config.extent_m),
            },
            district_id: (i % config.n_districts) as u32,
            profile: CommunityProfile {
                developer: "toy".into(),
                completion_year: 2000.0,
                building_count: 1.0,
                estate_count: 1.0,
                property_fee: 1.0,
            },
        })
        .collect();

    let mut dates: Vec<i64> = (0..config.n_events)
        .map(|_| rng.random_range(0..config.date_span))
        .collect();
    dates.sort_unstable();
    let mut events = Vec::with_capacity(config.n_events);
    let mut x = Vec::with_capacity(config.n_events);
    for (i, date) in dates.into_iter().enumerate() {
        let c = &communities[rng.random_range(0..communities.len())];
        events.push(TransactionEvent {
            id: i as u32,
            location: Point {
                x: c.centroid.x + rng.random_range(-30.0..30.0),
                y: c.centroid.y + rng.random_range(-30.0..30.0),
            },
            date,
            community_id: c.id,
            attributes: BTreeMap::new(),
            price: Some(rng.random_range(1.0..5.0)),
        });
        x.push(
            (0..config.n_features)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        );
    }

    let vectors: Vec<Vec<Vec<f64>>> = EdgeType::ALL
        .iter()
        .map(|_| {
            (0..config.n_communities)
                .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect()
        })
        .collect();
    let typed: Vec<(EdgeType, &[Vec<f64>])> = EdgeType::ALL
        .iter()
        .zip(&vectors)
        .map(|(t, v)| (*t, v.as_slice()))
        .collect();
    let ids: Vec<u32> = communities.iter().map(|c| c.id).collect();
    let hetero = build_hetero_edges(&ids, &typed, config.sim_quantile)?;

    let world = ModelWorld::new(config.hyper, &events, x, &communities, hetero)?;
    Ok((world, events))
}
