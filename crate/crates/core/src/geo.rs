//! Planar geometry. All coordinates are meters in a local planar frame.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Local equirectangular projection around a reference longitude/latitude.
///
/// Adequate at city scale, where the distortion over a few tens of
/// kilometers stays well under a meter per hundred meters.
#[derive(Debug, Clone, Copy)]
pub struct Equirectangular {
    lon0: f64,
    lat0: f64,
    cos_lat0: f64,
}

impl Equirectangular {
    pub fn new(lon0: f64, lat0: f64) -> Self {
        Equirectangular {
            lon0,
            lat0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    /// Projection centered at the mean of the given (lon, lat) pairs.
    pub fn around(points: &[(f64, f64)]) -> Self {
        let n = points.len().max(1) as f64;
        let (slon, slat) = points.iter().fold((0.0, 0.0), |(a, b), (lon, lat)| (a + lon, b + lat));
        Self::new(slon / n, slat / n)
    }

    pub fn project(&self, lon: f64, lat: f64) -> Point {
        Point {
            x: (lon - self.lon0).to_radians() * self.cos_lat0 * EARTH_RADIUS_M,
            y: (lat - self.lat0).to_radians() * EARTH_RADIUS_M,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        assert_eq!(Point::new(0.0, 0.0).distance(&Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn projection_scale() {
        let p = Equirectangular::new(116.4, 39.9);
        let origin = p.project(116.4, 39.9);
        assert_eq!(origin, Point::new(0.0, 0.0));
        // one hundredth of a degree of latitude is about 1.11 km
        let north = p.project(116.4, 39.91);
        assert!((north.y - 1111.95).abs() < 1.0, "{}", north.y);
    }
}
