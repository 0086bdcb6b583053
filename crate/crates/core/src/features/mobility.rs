//! Trip volumes and outbound trip mixes per community.

use crate::data::{Community, Schema, Trip};
use crate::geo::Point;
use crate::spatial::SpatialGrid;

/// Trip endpoints farther than this from every centroid are not attributed.
pub const ATTRIBUTION_RADIUS_M: f64 = 500.0;

pub fn mobility_width(schema: &Schema) -> usize {
    4 + 2 * schema.travel_modes.len() + 2 * schema.destination_types.len()
}

/// Slot names in output order.
pub fn mobility_slots(schema: &Schema) -> Vec<String> {
    let mut names = vec![
        "inflow.workday".to_string(),
        "inflow.weekend".into(),
        "outflow.workday".into(),
        "outflow.weekend".into(),
    ];
    for day in ["workday", "weekend"] {
        names.extend(schema.travel_modes.iter().map(|m| format!("mode.{day}={m}")));
    }
    for day in ["workday", "weekend"] {
        names.extend(
            schema
                .destination_types
                .iter()
                .map(|d| format!("destination.{day}={d}")),
        );
    }
    names
}

/// Index into `communities` of the nearest centroid within `radius`.
/// Ties go to the earlier community.
pub fn nearest_community(grid: &SpatialGrid<usize>, p: &Point, radius: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    grid.for_each_within(p, radius, |_, &i, d| {
        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
            best = Some((d, i));
        }
    });
    best.map(|(_, i)| i)
}

/// Mobility vectors for all communities, indexed like `communities`.
///
/// Layout: inflow and outflow volumes (workday, weekend), then the travel
/// mode distribution of outbound trips for workdays and weekends, then the
/// destination-type distribution likewise. Distributions sum to 1 or are 0.
pub fn mobility_features(schema: &Schema, communities: &[Community], trips: &[Trip], radius_m: f64) -> Vec<Vec<f64>> {
    let mut grid = SpatialGrid::new(radius_m.max(1.0));
    for (i, c) in communities.iter().enumerate() {
        grid.insert(c.centroid, i);
    }
    let n_modes = schema.travel_modes.len();
    let n_dest = schema.destination_types.len();
    let mode_base = 4;
    let dest_base = mode_base + 2 * n_modes;
    let mut out = vec![vec![0.0; mobility_width(schema)]; communities.len()];

    for t in trips {
        let half = usize::from(t.is_weekend);
        if let Some(i) = nearest_community(&grid, &t.destination, radius_m) {
            out[i][half] += 1.0;
        }
        if let Some(i) = nearest_community(&grid, &t.origin, radius_m) {
            out[i][2 + half] += 1.0;
            if let Some(m) = schema.travel_modes.iter().position(|m| *m == t.travel_mode) {
                out[i][mode_base + half * n_modes + m] += 1.0;
            }
            if let Some(d) = schema.destination_types.iter().position(|d| *d == t.destination_type) {
                out[i][dest_base + half * n_dest + d] += 1.0;
            }
        }
    }
    for v in &mut out {
        for half in 0..2 {
            normalize(&mut v[mode_base + half * n_modes..mode_base + (half + 1) * n_modes]);
            normalize(&mut v[dest_base + half * n_dest..dest_base + (half + 1) * n_dest]);
        }
    }
    out
}

/// Scale to sum 1, leaving an all-zero slice alone.
pub(crate) fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CommunityProfile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn community(id: u32, x: f64, y: f64) -> Community {
        Community {
            id,
            name: format!("c{id}"),
            centroid: Point::new(x, y),
            district_id: 0,
            profile: CommunityProfile {
                developer: "developer_0".into(),
                completion_year: 2000.0,
                building_count: 1.0,
                estate_count: 1.0,
                property_fee: 1.0,
            },
        }
    }

    fn trip(from: Point, to: Point, mode: &str, weekend: bool) -> Trip {
        Trip {
            origin: from,
            destination: to,
            travel_mode: mode.into(),
            destination_type: "shopping".into(),
            is_weekend: weekend,
        }
    }

    #[test]
    fn no_trips_is_all_zero() {
        let s = Schema::default();
        let f = mobility_features(&s, &[community(0, 0.0, 0.0)], &[], 500.0);
        assert!(f[0].iter().all(|v| *v == 0.0));
        assert_eq!(f[0].len(), mobility_width(&s));
        assert_eq!(mobility_slots(&s).len(), mobility_width(&s));
    }

    #[test]
    fn mode_mix_of_outbound_trips() {
        let s = Schema::default();
        let home = Point::new(0.0, 0.0);
        let away = Point::new(10_000.0, 0.0);
        let trips = [
            trip(home, away, "drive", false),
            trip(home, away, "drive", false),
            trip(home, away, "walk", false),
            trip(home, away, "walk", false),
        ];
        let f = &mobility_features(&s, &[community(0, 0.0, 0.0)], &trips, 500.0)[0];
        assert_eq!(&f[..4], &[0.0, 0.0, 4.0, 0.0]);
        let drive = s.travel_modes.iter().position(|m| m == "drive").unwrap();
        let walk = s.travel_modes.iter().position(|m| m == "walk").unwrap();
        let modes = &f[4..4 + s.travel_modes.len()];
        for (k, v) in modes.iter().enumerate() {
            let want = if k == drive || k == walk { 0.5 } else { 0.0 };
            assert_eq!(*v, want);
        }
    }

    #[test]
    fn volumes_match_brute_force() {
        let s = Schema::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let communities: Vec<Community> = (0..40)
            .map(|i| community(i, rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)))
            .collect();
        let pt = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0));
        let trips: Vec<Trip> = (0..2000)
            .map(|_| {
                let (a, b) = (pt(&mut rng), pt(&mut rng));
                trip(a, b, "bus", rng.random_bool(0.3))
            })
            .collect();
        let f = mobility_features(&s, &communities, &trips, 500.0);

        let attribute = |p: &Point| {
            let mut best = None;
            for (i, c) in communities.iter().enumerate() {
                let d = c.centroid.distance(p);
                if d <= 500.0 && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            best.map(|(_, i)| i)
        };
        let mut want = vec![[0.0; 4]; communities.len()];
        for t in &trips {
            let h = t.is_weekend as usize;
            if let Some(i) = attribute(&t.destination) {
                want[i][h] += 1.0;
            }
            if let Some(i) = attribute(&t.origin) {
                want[i][2 + h] += 1.0;
            }
        }
        for (got, want) in f.iter().zip(&want) {
            assert_eq!(&got[..4], want);
        }
    }
}
