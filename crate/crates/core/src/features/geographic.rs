//! Facility counts and nearest distances around a location.

use crate::data::{Facility, Schema, GEO_FACTOR_COUNT};
use crate::geo::Point;
use crate::spatial::SpatialGrid;

/// Distance reported when no facility of a category lies within the cap.
pub const NEAREST_CAP_M: f64 = 5000.0;

/// Width of the geographical group: count and nearest distance per factor,
/// plus the total facility count.
pub const GEO_WIDTH: usize = 2 * GEO_FACTOR_COUNT + 1;

pub struct FacilityIndex {
    per_factor: Vec<SpatialGrid<()>>,
    all: SpatialGrid<()>,
}

impl FacilityIndex {
    pub fn new(schema: &Schema, facilities: &[Facility], cell_size: f64) -> Self {
        let mut per_factor: Vec<SpatialGrid<()>> = (0..GEO_FACTOR_COUNT).map(|_| SpatialGrid::new(cell_size)).collect();
        let mut all = SpatialGrid::new(cell_size);
        for f in facilities {
            if let Some(k) = schema.geo_factor(f.kind, &f.category) {
                per_factor[k].insert(f.location, ());
            }
            all.insert(f.location, ());
        }
        FacilityIndex { per_factor, all }
    }

    /// `[count_0, nearest_0, ..., count_6, nearest_6, total_count]`.
    pub fn features(&self, point: &Point, radius_m: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(GEO_WIDTH);
        for grid in &self.per_factor {
            out.push(grid.count_within(point, radius_m) as f64);
            out.push(grid.nearest_distance(point, NEAREST_CAP_M).unwrap_or(NEAREST_CAP_M));
        }
        out.push(self.all.count_within(point, radius_m) as f64);
        out
    }
}

/// One-shot form for callers without a prebuilt index.
pub fn geographical_features(schema: &Schema, point: &Point, facilities: &[Facility], radius_m: f64) -> Vec<f64> {
    FacilityIndex::new(schema, facilities, radius_m.max(1.0)).features(point, radius_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FacilityKind, GEO_FACTORS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poi(category: &str, x: f64, y: f64) -> Facility {
        Facility {
            kind: FacilityKind::Poi,
            category: category.into(),
            location: Point::new(x, y),
        }
    }

    #[test]
    fn missing_category_uses_cap() {
        let schema = Schema::default();
        let f = geographical_features(&schema, &Point::default(), &[poi("education", 300.0, 0.0)], 500.0);
        assert_eq!(f.len(), GEO_WIDTH);
        // transportation: nothing citywide
        assert_eq!((f[0], f[1]), (0.0, NEAREST_CAP_M));
        // education: one school at 300 m
        assert_eq!((f[2], f[3]), (1.0, 300.0));
        assert_eq!(f[GEO_WIDTH - 1], 1.0);
    }

    #[test]
    fn counts_match_brute_force() {
        let schema = Schema::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut facilities: Vec<Facility> = (0..1000)
            .map(|_| {
                let cat = &schema.poi_categories[rng.random_range(0..schema.poi_categories.len())];
                poi(cat, rng.random_range(0.0..4000.0), rng.random_range(0.0..4000.0))
            })
            .collect();
        facilities.extend((0..50).map(|_| Facility {
            kind: FacilityKind::Station,
            category: "subway".into(),
            location: Point::new(rng.random_range(0.0..4000.0), rng.random_range(0.0..4000.0)),
        }));
        let index = FacilityIndex::new(&schema, &facilities, 500.0);
        for _ in 0..100 {
            let p = Point::new(rng.random_range(0.0..4000.0), rng.random_range(0.0..4000.0));
            let got = index.features(&p, 500.0);
            for (k, factor) in GEO_FACTORS.iter().enumerate() {
                let of_factor: Vec<&Facility> = facilities
                    .iter()
                    .filter(|f| schema.geo_factor(f.kind, &f.category) == Some(k))
                    .collect();
                let count = of_factor.iter().filter(|f| f.location.distance(&p) <= 500.0).count();
                let nearest = of_factor
                    .iter()
                    .map(|f| f.location.distance(&p))
                    .fold(NEAREST_CAP_M, f64::min);
                assert_eq!(got[2 * k], count as f64, "{factor}");
                assert!((got[2 * k + 1] - nearest).abs() < 1e-9, "{factor}");
            }
            let total = facilities.iter().filter(|f| f.location.distance(&p) <= 500.0).count();
            assert_eq!(got[GEO_WIDTH - 1], total as f64);
        }
    }
}
