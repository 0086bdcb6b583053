//! Seeded synthetic city.
//!
//! Prices follow a known latent model:
//!
//! ```text
//! price = base + district_offset[m] + field_scale * field(location)
//!       + community_effect[c] + attribute_weights . encode(attributes)
//!       + trend_per_year * date / 365 + noise
//! ```
//!
//! where `field` is a standardized sum of radial bumps and `field_scale`
//! grows with `spatial_autocorr_strength`. Resident incomes, facility density
//! and visit volume are tied to the latent price so that the auxiliary
//! records carry signal. The latent parameters are written to `latent.json`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    self, AttributeKind, AttributeValue, Checkin, Community, CommunityId, CommunityProfile, Dataset, Day,
    EstateAttributes, Facility, FacilityKind, Resident, Schema, TransactionEvent, Trip, UrbanRecords, MINUTES_PER_DAY,
};
use crate::error::{MugrepError, Result};
use crate::geo::Point;

pub const LATENT_FILE: &str = "latent.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_districts: usize,
    pub n_communities: usize,
    pub n_transactions: usize,
    pub city_extent_m: f64,
    pub spatial_autocorr_strength: f64,
    pub temporal_drift_per_year: f64,
    pub noise_std: f64,
    pub date_range_days: i64,
    pub n_pois: usize,
    pub n_stations: usize,
    pub n_checkins: usize,
    pub n_trips: usize,
    pub n_users: usize,
    pub n_field_bumps: usize,
    /// Overrides the randomly drawn district offsets when set.
    pub district_offsets: Option<Vec<f64>>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            n_districts: 4,
            n_communities: 400,
            n_transactions: 5000,
            city_extent_m: 12_000.0,
            spatial_autocorr_strength: 0.8,
            temporal_drift_per_year: 0.3,
            noise_std: 0.3,
            date_range_days: 730,
            n_pois: 4000,
            n_stations: 300,
            n_checkins: 40_000,
            n_trips: 20_000,
            n_users: 8000,
            n_field_bumps: 40,
            district_offsets: None,
        }
    }
}

impl GeneratorConfig {
    /// A 60-community city for tests and examples.
    pub fn small() -> Self {
        GeneratorConfig {
            n_communities: 60,
            n_transactions: 600,
            n_pois: 400,
            n_stations: 40,
            n_checkins: 2000,
            n_trips: 1000,
            n_users: 600,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MugrepError::InvalidConfig(m.to_string()));
        if !(self.city_extent_m > 0.0) {
            return bad("city_extent_m must be positive (zero-area city)");
        }
        if !(0.0..=1.0).contains(&self.spatial_autocorr_strength) {
            return bad("spatial_autocorr_strength must lie in [0, 1]");
        }
        let counts = [
            self.n_districts,
            self.n_communities,
            self.n_transactions,
            self.n_pois,
            self.n_stations,
            self.n_checkins,
            self.n_trips,
            self.n_users,
            self.n_field_bumps,
        ];
        if counts.contains(&0) || self.date_range_days < 1 {
            return bad("all counts must be at least 1");
        }
        if self.n_districts > self.n_communities {
            return bad("every district needs at least one community");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if let Some(o) = &self.district_offsets {
            if o.len() != self.n_districts {
                return bad("district_offsets must have n_districts entries");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

/// Ground-truth parameters of the price process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPriceModel {
    pub base: f64,
    pub district_offsets: Vec<f64>,
    pub bumps: Vec<Bump>,
    /// Standardization of the raw bump sum over the city.
    pub field_mean: f64,
    pub field_std: f64,
    pub field_scale: f64,
    /// Weights over [`encode_attributes`].
    pub attribute_weights: Vec<f64>,
    pub trend_per_year: f64,
    pub community_effects: BTreeMap<CommunityId, f64>,
    pub noise_std: f64,
}

impl LatentPriceModel {
    /// Standardized spatial field at `p`.
    pub fn field(&self, p: &Point) -> f64 {
        (raw_field(&self.bumps, p) - self.field_mean) / self.field_std
    }

    /// Latent price component shared by every estate of a community at day 0.
    pub fn community_level(&self, c: &Community) -> f64 {
        self.base
            + self.district_offsets[c.district_id as usize]
            + self.field_scale * self.field(&c.centroid)
            + self.community_effects.get(&c.id).copied().unwrap_or(0.0)
    }

    /// Noise-free price of an estate.
    pub fn expected_price(
        &self,
        schema: &Schema,
        c: &Community,
        location: &Point,
        date: Day,
        attrs: &EstateAttributes,
    ) -> f64 {
        let attr: f64 = encode_attributes(schema, attrs)
            .iter()
            .zip(&self.attribute_weights)
            .map(|(a, w)| a * w)
            .sum();
        self.base
            + self.district_offsets[c.district_id as usize]
            + self.field_scale * self.field(location)
            + self.community_effects.get(&c.id).copied().unwrap_or(0.0)
            + attr
            + self.trend_per_year * date as f64 / 365.0
    }
}

fn raw_field(bumps: &[Bump], p: &Point) -> f64 {
    bumps
        .iter()
        .map(|b| b.amplitude * (-p.distance_sq(&b.center) / (2.0 * b.radius * b.radius)).exp())
        .sum()
}

/// Numeric encoding of estate attributes used by the latent price model:
/// numeric attributes scaled to unit-ish range, categoricals one-hot.
pub fn encode_attributes(schema: &Schema, attrs: &EstateAttributes) -> Vec<f64> {
    let mut out = Vec::new();
    for spec in &schema.estate_attributes {
        match spec.kind {
            AttributeKind::Numeric => {
                let v = attrs.get(&spec.name).and_then(AttributeValue::as_number).unwrap_or(0.0);
                let scale = match spec.name.as_str() {
                    "area" => 100.0,
                    "floor_number" => 10.0,
                    _ => 1.0,
                };
                out.push(v / scale);
            }
            AttributeKind::Categorical => {
                let v = attrs.get(&spec.name).and_then(AttributeValue::as_category);
                out.extend(spec.values.iter().map(|c| f64::from(Some(c.as_str()) == v)));
            }
        }
    }
    out
}

const NAME_FIRST: [&str; 20] = [
    "Golden",
    "Willow",
    "Maple",
    "Jade",
    "Harmony",
    "Sunrise",
    "Lakeview",
    "Pine",
    "Silver",
    "Orchid",
    "Riverside",
    "Cedar",
    "Lotus",
    "Summit",
    "Bamboo",
    "Crescent",
    "Emerald",
    "Peach",
    "Azure",
    "Oak",
];
const NAME_SECOND: [&str; 20] = [
    "Garden",
    "Court",
    "Terrace",
    "Park",
    "Heights",
    "Villa",
    "Residence",
    "Square",
    "Manor",
    "Grove",
    "Plaza",
    "Bay",
    "Ridge",
    "Hill",
    "Harbor",
    "Meadow",
    "Landing",
    "Crest",
    "Commons",
    "Yard",
];
const NAME_THIRD: [&str; 5] = ["", " East", " West", " North", " South"];

fn community_name(i: usize) -> String {
    let a = NAME_FIRST[i % 20];
    let b = NAME_SECOND[(i / 20) % 20];
    let c = NAME_THIRD[(i / 400) % 5];
    let round = i / 2000;
    if round == 0 {
        format!("{a} {b}{c}")
    } else {
        format!("{a} {b}{c} {}", round + 1)
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn round_point(p: Point) -> Point {
    Point::new(round_to(p.x, 2), round_to(p.y, 2))
}

fn clamp_point(p: Point, extent: f64) -> Point {
    Point::new(p.x.clamp(0.0, extent), p.y.clamp(0.0, extent))
}

fn uniform_point(rng: &mut ChaCha8Rng, extent: f64) -> Point {
    Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent))
}

fn jitter(rng: &mut ChaCha8Rng, center: &Point, sigma: f64) -> Point {
    let n = Normal::new(0.0, sigma).expect("positive sigma");
    Point::new(center.x + n.sample(rng), center.y + n.sample(rng))
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Generate the dataset in memory along with its latent model.
pub fn generate_dataset(config: &GeneratorConfig) -> Result<(Dataset, LatentPriceModel)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schema = Schema::default();
    let extent = config.city_extent_m;

    // spatial field
    let bumps: Vec<Bump> = (0..config.n_field_bumps)
        .map(|_| Bump {
            center: uniform_point(&mut rng, extent),
            radius: rng.random_range(0.05..0.12) * extent,
            amplitude: rng.random_range(-1.0..1.0),
        })
        .collect();
    let probe: Vec<f64> = (0..4000)
        .map(|_| raw_field(&bumps, &uniform_point(&mut rng, extent)))
        .collect();
    let field_mean = probe.iter().sum::<f64>() / probe.len() as f64;
    let field_std = (probe.iter().map(|v| (v - field_mean).powi(2)).sum::<f64>() / probe.len() as f64)
        .sqrt()
        .max(1e-9);

    let district_offsets = match &config.district_offsets {
        Some(o) => o.clone(),
        None => {
            let n = Normal::new(0.0, 0.8).expect("valid");
            (0..config.n_districts)
                .map(|_| round_to(n.sample(&mut rng), 3))
                .collect()
        }
    };

    let attribute_weights: Vec<f64> = {
        let n = Normal::new(0.0, 0.25).expect("valid");
        let width: usize = schema
            .estate_attributes
            .iter()
            .map(|a| match a.kind {
                AttributeKind::Numeric => 1,
                AttributeKind::Categorical => a.values.len(),
            })
            .sum();
        (0..width).map(|_| round_to(n.sample(&mut rng), 3)).collect()
    };

    let mut latent = LatentPriceModel {
        base: 6.0,
        district_offsets,
        bumps,
        field_mean,
        field_std,
        field_scale: 2.0 * config.spatial_autocorr_strength,
        attribute_weights,
        trend_per_year: config.temporal_drift_per_year,
        community_effects: BTreeMap::new(),
        noise_std: config.noise_std,
    };

    let communities = generate_communities(config, &schema, &mut rng);
    let effect = Normal::new(0.0, 0.6).expect("valid");
    for c in &communities {
        let fee_term = 0.15 * (c.profile.property_fee - 3.0);
        latent
            .community_effects
            .insert(c.id, round_to(effect.sample(&mut rng) + fee_term, 4));
    }

    let events = generate_transactions(config, &schema, &communities, &latent, &mut rng);
    let facilities = generate_facilities(config, &schema, &latent, &mut rng);
    let residents = generate_residents(config, &schema, &communities, &latent, &mut rng);
    let checkins = generate_checkins(config, &communities, &residents, &facilities, &latent, &mut rng);
    let trips = generate_trips(config, &schema, &communities, &residents, &facilities, &mut rng);

    let dataset = Dataset {
        schema,
        events,
        communities,
        records: UrbanRecords {
            facilities,
            checkins,
            trips,
            residents,
        },
    };
    Ok((dataset, latent))
}

/// Generate and write the dataset plus `latent.json` to `dir`.
/// The same config always produces byte-identical files.
pub fn generate(config: &GeneratorConfig, dir: &Path) -> Result<Dataset> {
    let (dataset, latent) = generate_dataset(config)?;
    data::write_dataset(dir, &dataset)?;
    let path = dir.join(LATENT_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&latent)? + "\n").map_err(|e| MugrepError::io(&path, e))?;
    Ok(dataset)
}

pub fn load_latent(dir: &Path) -> Result<LatentPriceModel> {
    let path = dir.join(LATENT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| MugrepError::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn generate_communities(config: &GeneratorConfig, schema: &Schema, rng: &mut ChaCha8Rng) -> Vec<Community> {
    let extent = config.city_extent_m;
    let n_clusters = 12.max(config.n_districts);
    let clusters: Vec<Point> = (0..n_clusters).map(|_| uniform_point(rng, extent)).collect();
    let centroids: Vec<Point> = (0..config.n_communities)
        .map(|_| {
            if rng.random_bool(0.7) {
                let c = clusters.choose(rng).expect("nonempty");
                round_point(clamp_point(jitter(rng, c, 0.1 * extent), extent))
            } else {
                round_point(uniform_point(rng, extent))
            }
        })
        .collect();

    // district seeds are existing communities, so every district is nonempty
    let mut order: Vec<usize> = (0..config.n_communities).collect();
    for i in 0..config.n_districts {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let seeds: Vec<Point> = order[..config.n_districts].iter().map(|&i| centroids[i]).collect();

    let mut name_slots: Vec<usize> = (0..config.n_communities).collect();
    for i in (1..name_slots.len()).rev() {
        let j = rng.random_range(0..=i);
        name_slots.swap(i, j);
    }

    centroids
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let district = seeds
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.distance(p).total_cmp(&b.1.distance(p)))
                .map(|(d, _)| d as u32)
                .expect("at least one district");
            let buildings = rng.random_range(2..40) as f64;
            Community {
                id: i as u32,
                name: community_name(name_slots[i]),
                centroid: *p,
                district_id: district,
                profile: CommunityProfile {
                    developer: schema.developers.choose(rng).expect("developers").clone(),
                    completion_year: rng.random_range(1985..2020) as f64,
                    building_count: buildings,
                    estate_count: (buildings * rng.random_range(40.0..120.0_f64)).round(),
                    property_fee: round_to(rng.random_range(0.8..6.0), 2),
                },
            }
        })
        .collect()
}

fn sample_attributes(rng: &mut ChaCha8Rng, schema: &Schema) -> EstateAttributes {
    let mut attrs = EstateAttributes::new();
    let area: f64 = round_to(rng.random_range(35.0..180.0), 1);
    for spec in &schema.estate_attributes {
        let value = match (spec.kind, spec.name.as_str()) {
            (AttributeKind::Numeric, "area") => AttributeValue::Number(area),
            (AttributeKind::Numeric, "rooms") => {
                AttributeValue::Number((area / 35.0).round().clamp(1.0, 6.0) + rng.random_range(0..2) as f64)
            }
            (AttributeKind::Numeric, "floor_number") => AttributeValue::Number(rng.random_range(2..34) as f64),
            (AttributeKind::Numeric, "elevator_ratio") => {
                AttributeValue::Number(round_to(rng.random_range(0.0..1.0), 3))
            }
            (AttributeKind::Numeric, _) => AttributeValue::Number(round_to(rng.random_range(0.0..10.0), 2)),
            (AttributeKind::Categorical, _) => {
                AttributeValue::Category(spec.values.choose(rng).expect("declared values").clone())
            }
        };
        attrs.insert(spec.name.clone(), value);
    }
    attrs
}

fn sample_date(rng: &mut ChaCha8Rng, range: i64) -> Day {
    // mild weekly rhythm: weekends are busier
    loop {
        let d = rng.random_range(0..range);
        let weight = if data::is_weekend(d) { 1.0 } else { 0.7 };
        if rng.random_bool(weight) {
            return d;
        }
    }
}

fn generate_transactions(
    config: &GeneratorConfig,
    schema: &Schema,
    communities: &[Community],
    latent: &LatentPriceModel,
    rng: &mut ChaCha8Rng,
) -> Vec<TransactionEvent> {
    let popularity = LogNormal::new(0.0, 1.0).expect("valid");
    let weights: Vec<f64> = communities.iter().map(|_| popularity.sample(rng)).collect();
    let noise = Normal::new(0.0, config.noise_std.max(1e-12)).expect("valid");

    let mut events: Vec<TransactionEvent> = (0..config.n_transactions)
        .map(|_| {
            let c = &communities[weighted_index(rng, &weights)];
            let location = round_point(jitter(rng, &c.centroid, 60.0));
            let date = sample_date(rng, config.date_range_days);
            let attributes = sample_attributes(rng, schema);
            let mean = latent.expected_price(schema, c, &location, date, &attributes);
            let eps = if config.noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
            TransactionEvent {
                id: 0,
                location,
                date,
                community_id: c.id,
                attributes,
                price: Some(round_to((mean + eps).max(0.3), 4)),
            }
        })
        .collect();
    events.sort_by_key(|e| e.date);
    for (i, e) in events.iter_mut().enumerate() {
        e.id = i as u32;
    }
    events
}

fn generate_facilities(
    config: &GeneratorConfig,
    schema: &Schema,
    latent: &LatentPriceModel,
    rng: &mut ChaCha8Rng,
) -> Vec<Facility> {
    let extent = config.city_extent_m;
    let weights = [1.0, 0.6, 1.4, 2.0, 1.0, 0.4];
    let hot: Vec<&Bump> = latent.bumps.iter().filter(|b| b.amplitude > 0.0).collect();
    let mut out = Vec::with_capacity(config.n_pois + config.n_stations);
    for _ in 0..config.n_pois {
        let category = schema.poi_categories[weighted_index(rng, &weights[..schema.poi_categories.len()])].clone();
        let unpleasant = category == "unpleasantness";
        let location = if !unpleasant && !hot.is_empty() && rng.random_bool(0.6) {
            let b = hot[weighted_index(rng, &hot.iter().map(|b| b.amplitude).collect::<Vec<_>>())];
            clamp_point(jitter(rng, &b.center, 0.6 * b.radius), extent)
        } else {
            uniform_point(rng, extent)
        };
        out.push(Facility {
            kind: FacilityKind::Poi,
            category,
            location: round_point(location),
        });
    }
    for _ in 0..config.n_stations {
        out.push(Facility {
            kind: FacilityKind::Station,
            category: schema.station_categories.choose(rng).expect("stations").clone(),
            location: round_point(uniform_point(rng, extent)),
        });
    }
    out
}

/// Percentile rank of each community's latent level, in [0, 1].
fn latent_ranks(communities: &[Community], latent: &LatentPriceModel) -> Vec<f64> {
    let levels: Vec<f64> = communities.iter().map(|c| latent.community_level(c)).collect();
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut rank = vec![0.0; levels.len()];
    let denom = (levels.len().max(2) - 1) as f64;
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64 / denom;
    }
    rank
}

fn leveled_choice(rng: &mut ChaCha8Rng, n_levels: usize, level: f64) -> usize {
    let target = level * (n_levels - 1) as f64;
    let w: Vec<f64> = (0..n_levels)
        .map(|k| (-(k as f64 - target).powi(2) / 0.6).exp())
        .collect();
    weighted_index(rng, &w)
}

fn generate_residents(
    config: &GeneratorConfig,
    schema: &Schema,
    communities: &[Community],
    latent: &LatentPriceModel,
    rng: &mut ChaCha8Rng,
) -> Vec<Resident> {
    let ranks = latent_ranks(communities, latent);
    let weights: Vec<f64> = communities.iter().map(|c| c.profile.estate_count).collect();
    (0..config.n_users)
        .map(|_| {
            let ci = weighted_index(rng, &weights);
            let r = ranks[ci];
            let mut attributes = BTreeMap::new();
            for spec in &schema.user_attributes {
                let n = spec.values.len();
                let k = match spec.name.as_str() {
                    "income" | "consumption" | "education" => leveled_choice(rng, n, r),
                    "car_owner" => usize::from(rng.random_bool(0.2 + 0.6 * r)),
                    _ => rng.random_range(0..n),
                };
                attributes.insert(spec.name.clone(), spec.values[k].clone());
            }
            Resident {
                community_id: communities[ci].id,
                attributes,
            }
        })
        .collect()
}

fn generate_checkins(
    config: &GeneratorConfig,
    communities: &[Community],
    residents: &[Resident],
    facilities: &[Facility],
    latent: &LatentPriceModel,
    rng: &mut ChaCha8Rng,
) -> Vec<Checkin> {
    let extent = config.city_extent_m;
    let activity: Vec<f64> = facilities
        .iter()
        .map(|f| (0.8 * latent.field(&f.location)).exp())
        .collect();
    let n_users = residents.len().max(1);
    let hour_weights: Vec<f64> = (0..24)
        .map(|h| match h {
            0..=6 => 0.2,
            7..=9 => 1.0,
            10..=17 => 1.6,
            18..=22 => 1.8,
            _ => 0.5,
        })
        .collect();
    (0..config.n_checkins)
        .map(|_| {
            let user = rng.random_range(0..n_users);
            let place = if rng.random_bool(0.6) {
                facilities[weighted_index(rng, &activity)].location
            } else {
                let home = residents[user % residents.len()].community_id as usize;
                communities[home].centroid
            };
            let day = rng.random_range(0..config.date_range_days);
            let hour = weighted_index(rng, &hour_weights) as i64;
            let minute = day * MINUTES_PER_DAY + hour * 60 + rng.random_range(0..60);
            Checkin {
                user_id: user as u64,
                location: round_point(clamp_point(jitter(rng, &place, 80.0), extent)),
                minute,
            }
        })
        .collect()
}

fn generate_trips(
    config: &GeneratorConfig,
    schema: &Schema,
    communities: &[Community],
    residents: &[Resident],
    facilities: &[Facility],
    rng: &mut ChaCha8Rng,
) -> Vec<Trip> {
    let extent = config.city_extent_m;
    let income_spec = schema.user_attribute("income");
    (0..config.n_trips)
        .map(|_| {
            let r = &residents[rng.random_range(0..residents.len())];
            let home = &communities[r.community_id as usize];
            let level = income_spec
                .and_then(|s| r.attributes.get("income").and_then(|v| s.index_of(v)))
                .map(|k| k as f64 / 3.0)
                .unwrap_or(0.5);
            let mode_w: Vec<f64> = schema
                .travel_modes
                .iter()
                .map(|m| match m.as_str() {
                    "drive" => 0.3 + 1.5 * level,
                    "taxi" => 0.3 + 0.8 * level,
                    "bus" => 1.4 - level,
                    _ => 0.8,
                })
                .collect();
            let dest_w: Vec<f64> = schema
                .destination_types
                .iter()
                .map(|d| match d.as_str() {
                    "enterprise" => 1.0 + level,
                    "entertainment" => 0.5 + level,
                    _ => 1.0,
                })
                .collect();
            let dest = facilities[rng.random_range(0..facilities.len())].location;
            let outbound = rng.random_bool(0.5);
            let home_pt = clamp_point(jitter(rng, &home.centroid, 120.0), extent);
            let (origin, destination) = if outbound { (home_pt, dest) } else { (dest, home_pt) };
            Trip {
                origin: round_point(origin),
                destination: round_point(destination),
                travel_mode: schema.travel_modes[weighted_index(rng, &mode_w)].clone(),
                destination_type: schema.destination_types[weighted_index(rng, &dest_w)].clone(),
                is_weekend: rng.random_bool(2.0 / 7.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictSummary {
    pub district_id: u32,
    pub n_communities: usize,
    pub n_transactions: usize,
    pub price_mean: f64,
    pub price_std: f64,
}

/// Dataset statistics in the layout of the usual "statistics of datasets" table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_transactions: usize,
    pub n_communities: usize,
    pub n_pois: usize,
    pub n_stations: usize,
    pub n_checkins: usize,
    pub n_trips: usize,
    pub n_users: usize,
    pub first_date: Option<Day>,
    pub last_date: Option<Day>,
    pub price_mean: f64,
    pub price_std: f64,
    pub districts: Vec<DistrictSummary>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn summarize(dataset: &Dataset) -> DatasetSummary {
    let prices: Vec<f64> = dataset.events.iter().filter_map(|e| e.price).collect();
    let (price_mean, price_std) = mean_std(&prices);
    let district_of: BTreeMap<CommunityId, u32> = dataset.communities.iter().map(|c| (c.id, c.district_id)).collect();
    let districts = (0..dataset.n_districts() as u32)
        .map(|d| {
            let p: Vec<f64> = dataset
                .events
                .iter()
                .filter(|e| district_of.get(&e.community_id) == Some(&d))
                .filter_map(|e| e.price)
                .collect();
            let (price_mean, price_std) = mean_std(&p);
            DistrictSummary {
                district_id: d,
                n_communities: dataset.communities.iter().filter(|c| c.district_id == d).count(),
                n_transactions: p.len(),
                price_mean,
                price_std,
            }
        })
        .collect();
    DatasetSummary {
        n_transactions: dataset.events.len(),
        n_communities: dataset.communities.len(),
        n_pois: dataset.records.pois().count(),
        n_stations: dataset.records.stations().count(),
        n_checkins: dataset.records.checkins.len(),
        n_trips: dataset.records.trips.len(),
        n_users: dataset.records.residents.len(),
        first_date: dataset.events.iter().map(|e| e.date).min(),
        last_date: dataset.latest_date(),
        price_mean,
        price_std,
        districts,
    }
}

/// Load a dataset directory and summarize it.
pub fn describe(dir: &Path) -> Result<DatasetSummary> {
    Ok(summarize(&data::load_dataset(dir)?))
}
