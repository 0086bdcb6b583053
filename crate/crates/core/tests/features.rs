use mugrep::data::{Dataset, TransactionEvent};
use mugrep::features::{
    historical_price_stats, CommunityBlocks, FeatureBuilder, FeatureGroup, FeatureLayout, GroupSelection, PriceHistory,
    SlotKind,
};
use mugrep::geo::Point;
use mugrep::synth::{generate_dataset, GeneratorConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_communities: 50,
        n_transactions: 800,
        n_pois: 300,
        n_stations: 30,
        n_checkins: 1500,
        n_trips: 800,
        n_users: 500,
        ..Default::default()
    }
}

/// Replace every event on or after `cutoff` with a scrambled copy: prices,
/// communities and dates shuffled among the future events.
fn scramble_future(d: &Dataset, cutoff: i64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    let future: Vec<usize> = (0..d.events.len()).filter(|&i| d.events[i].date >= cutoff).collect();
    let mut prices: Vec<Option<f64>> = future.iter().map(|&i| d.events[i].price).collect();
    let mut communities: Vec<u32> = future.iter().map(|&i| d.events[i].community_id).collect();
    prices.shuffle(&mut rng);
    communities.shuffle(&mut rng);
    for (k, &i) in future.iter().enumerate() {
        let e = &mut out.events[i];
        e.price = prices[k].map(|p| p * rng.random_range(0.5..2.0));
        e.community_id = communities[k];
        e.date = cutoff + rng.random_range(0..100);
    }
    out
}

#[test]
fn temporal_features_ignore_the_future() {
    let (d, _) = generate_dataset(&small(3)).unwrap();
    let blocks = CommunityBlocks::build(&d);
    let base = FeatureBuilder::with_blocks(&d, blocks.clone(), GroupSelection::ALL);
    let range = base.layout().group_range(FeatureGroup::Temporal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for trial in 0..20 {
        let e = &d.events[rng.random_range(0..d.events.len())];
        let scrambled = scramble_future(&d, e.date, trial);
        let other = FeatureBuilder::with_blocks(&scrambled, blocks.clone(), GroupSelection::ALL);
        let a = base.assemble_event(e).unwrap();
        let b = other.assemble_event(e).unwrap();
        assert_eq!(a[range.clone()], b[range.clone()], "event {}", e.id);
        assert_eq!(a, b);
    }
}

#[test]
fn distribution_slots_sum_to_one_or_zero() {
    for seed in 0..3 {
        let (d, _) = generate_dataset(&small(seed)).unwrap();
        let b = FeatureBuilder::new(&d, GroupSelection::ALL);
        let layout = b.layout();
        // distributions are contiguous runs of same-prefix slot names
        let mut runs: Vec<std::ops::Range<usize>> = Vec::new();
        let prefix = |name: &str| name.split('=').next().unwrap().to_string();
        for (i, s) in layout.slots.iter().enumerate() {
            if s.kind != SlotKind::Distribution {
                continue;
            }
            match runs.last_mut() {
                Some(r) if r.end == i && prefix(&layout.slots[r.start].name) == prefix(&s.name) => r.end = i + 1,
                _ => runs.push(i..i + 1),
            }
        }
        assert!(runs.len() >= 4 + d.schema.user_attributes.len());
        for e in &d.events {
            let x = b.assemble_event(e).unwrap();
            for r in &runs {
                let v = &x[r.clone()];
                assert!(v.iter().all(|p| *p >= 0.0));
                let s: f64 = v.iter().sum();
                assert!(
                    s == 0.0 || (s - 1.0).abs() < 1e-9,
                    "{} sums to {s}",
                    layout.slots[r.start].name
                );
            }
        }
    }
}

#[test]
fn similarity_vectors_are_centroid_group_outputs() {
    let (d, _) = generate_dataset(&small(8)).unwrap();
    let blocks = CommunityBlocks::build(&d);
    for (i, c) in d.communities.iter().enumerate().step_by(7) {
        let geo = mugrep::features::geographical_features(&d.schema, &c.centroid, &d.records.facilities, 500.0);
        assert_eq!(blocks.geographical[i], geo);
        let visit = mugrep::features::visit_features(&c.centroid, &d.records.checkins, 500.0);
        assert_eq!(blocks.visit[i], visit);
    }
    let z = blocks.similarity(FeatureGroup::Geographical);
    for k in 0..z[0].len() {
        let mean: f64 = z.iter().map(|r| r[k]).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 1e-9);
    }
}

#[test]
fn feature_ablation_layouts() {
    let schema = mugrep::data::Schema::default();
    let full = FeatureLayout::new(&schema, 3, GroupSelection::ALL);
    let basic = FeatureLayout::new(&schema, 3, GroupSelection::NONE);
    for g in FeatureGroup::AUXILIARY {
        assert!(full.group_range(g).is_some());
        assert!(basic.group_range(g).is_none());
        let without = FeatureLayout::new(&schema, 3, GroupSelection::ALL.without(g));
        assert!(without.group_range(g).is_none());
        assert_eq!(without.len(), full.len() - full.group_range(g).unwrap().len());
    }
}

fn event(date: i64, community_id: u32, price: f64) -> TransactionEvent {
    TransactionEvent {
        id: 0,
        location: Point::default(),
        date,
        community_id,
        attributes: Default::default(),
        price: Some(price),
    }
}

proptest! {
    #[test]
    fn history_stats_invariants(
        raw in prop::collection::vec((0i64..400, 0u32..3, 0.1f64..20.0), 0..60),
        valuation in 0i64..500,
        community in 0u32..3,
    ) {
        let history: Vec<TransactionEvent> = raw.iter().map(|&(d, c, p)| event(d, c, p)).collect();
        let s = historical_price_stats(community, valuation, &history);
        prop_assert_eq!(s.count == 0, s.missing);
        prop_assert!(s.variance >= 0.0);
        if s.count > 0 {
            prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
        }
        // same window, possibly different summation order
        let fast = PriceHistory::new(&history).stats(community, valuation);
        prop_assert_eq!((fast.count, fast.missing, fast.max, fast.min), (s.count, s.missing, s.max, s.min));
        prop_assert!((fast.mean - s.mean).abs() <= 1e-12 * s.mean.abs().max(1.0));
        prop_assert!((fast.variance - s.variance).abs() <= 1e-10 * s.variance.max(1.0));
    }
}
