//! Uniform spatial hash for radius queries on planar points.
//!
//! Cells are squares of side `cell_size`; a radius query with
//! `radius <= cell_size` touches at most the 3x3 block around the query cell.

use std::collections::HashMap;

use crate::geo::Point;

pub type CellKey = (i64, i64);

#[derive(Debug, Clone)]
pub struct SpatialGrid<T> {
    cell_size: f64,
    cells: HashMap<CellKey, Vec<(Point, T)>>,
    len: usize,
}

impl<T> SpatialGrid<T> {
    pub fn new(cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        SpatialGrid {
            cell_size,
            cells: HashMap::new(),
            len: 0,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn key(&self, p: &Point) -> CellKey {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
        )
    }

    pub fn insert(&mut self, p: Point, item: T) {
        let key = self.key(&p);
        self.cells.entry(key).or_default().push((p, item));
        self.len += 1;
    }

    /// Keys of all cells intersecting the axis-aligned box around a circle.
    pub fn cells_around(&self, center: &Point, radius: f64) -> impl Iterator<Item = CellKey> {
        let (x0, y0) = self.key(&Point::new(center.x - radius, center.y - radius));
        let (x1, y1) = self.key(&Point::new(center.x + radius, center.y + radius));
        (x0..=x1).flat_map(move |cx| (y0..=y1).map(move |cy| (cx, cy)))
    }

    pub fn cell(&self, key: CellKey) -> &[(Point, T)] {
        self.cells.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Visit every stored item within `radius` (inclusive) of `center`.
    pub fn for_each_within<F: FnMut(&Point, &T, f64)>(&self, center: &Point, radius: f64, mut f: F) {
        let r2 = radius * radius;
        for key in self.cells_around(center, radius) {
            for (p, item) in self.cell(key) {
                let d2 = p.distance_sq(center);
                if d2 <= r2 {
                    f(p, item, d2.sqrt());
                }
            }
        }
    }

    pub fn count_within(&self, center: &Point, radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(center, radius, |_, _, _| n += 1);
        n
    }

    /// Distance to the nearest stored point, searching rings of cells outward
    /// until no closer point can exist or `cap` is exceeded.
    pub fn nearest_distance(&self, center: &Point, cap: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let (cx, cy) = self.key(center);
        let max_ring = (cap / self.cell_size).ceil() as i64 + 1;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            for key in ring_keys(cx, cy, ring) {
                for (p, _) in self.cell(key) {
                    best = best.min(p.distance(center));
                }
            }
            // every point in ring r+1 or beyond is at least r * cell_size away
            if best <= ring as f64 * self.cell_size {
                break;
            }
        }
        (best <= cap).then_some(best)
    }
}

fn ring_keys(cx: i64, cy: i64, ring: i64) -> Vec<CellKey> {
    if ring == 0 {
        return vec![(cx, cy)];
    }
    let mut keys = Vec::with_capacity((8 * ring) as usize);
    for dx in -ring..=ring {
        keys.push((cx + dx, cy - ring));
        keys.push((cx + dx, cy + ring));
    }
    for dy in (-ring + 1)..ring {
        keys.push((cx - ring, cy + dy));
        keys.push((cx + ring, cy + dy));
    }
    keys
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radius_query_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..2000)
            .map(|_| Point::new(rng.random_range(-3000.0..3000.0), rng.random_range(-3000.0..3000.0)))
            .collect();
        let mut grid = SpatialGrid::new(500.0);
        for (i, p) in pts.iter().enumerate() {
            grid.insert(*p, i);
        }
        for _ in 0..200 {
            let c = Point::new(rng.random_range(-3500.0..3500.0), rng.random_range(-3500.0..3500.0));
            let mut got = Vec::new();
            grid.for_each_within(&c, 500.0, |_, i, _| got.push(*i));
            got.sort_unstable();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].distance(&c) <= 500.0).collect();
            assert_eq!(got, want);

            let nearest = pts.iter().map(|p| p.distance(&c)).fold(f64::INFINITY, f64::min);
            let found = grid.nearest_distance(&c, 5000.0).unwrap();
            assert!((found - nearest).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_respects_cap() {
        let mut grid = SpatialGrid::new(500.0);
        grid.insert(Point::new(6000.0, 0.0), ());
        assert_eq!(grid.nearest_distance(&Point::new(0.0, 0.0), 5000.0), None);
        assert_eq!(
            SpatialGrid::<()>::new(1.0).nearest_distance(&Point::default(), 10.0),
            None
        );
    }
}
