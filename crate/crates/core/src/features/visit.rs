//! Visit volumes from check-ins near a location.

use std::collections::HashSet;

use crate::data::{is_weekend, Checkin, MINUTES_PER_DAY};
use crate::geo::Point;
use crate::spatial::SpatialGrid;

/// Check-ins by the same user inside one 10-minute bucket count once.
pub const VISIT_BUCKET_MINUTES: i64 = 10;
pub const WORK_HOURS: (i64, i64) = (10 * 60, 18 * 60);
pub const BREAK_HOURS: (i64, i64) = (18 * 60, 23 * 60);

/// `[workday_work, workday_break, workday_all, weekend_work, weekend_break, weekend_all]`.
pub const VISIT_WIDTH: usize = 6;
pub const VISIT_SLOTS: [&str; VISIT_WIDTH] = [
    "workday.work",
    "workday.break",
    "workday.all",
    "weekend.work",
    "weekend.break",
    "weekend.all",
];

fn bucket_of(minute: i64) -> i64 {
    minute.div_euclid(VISIT_BUCKET_MINUTES)
}

/// Adds one visit starting at `bucket` to the six counters.
fn tally(out: &mut [f64], bucket: i64) {
    let start = bucket * VISIT_BUCKET_MINUTES;
    let day = start.div_euclid(MINUTES_PER_DAY);
    let tod = start.rem_euclid(MINUTES_PER_DAY);
    let base = if is_weekend(day) { 3 } else { 0 };
    if (WORK_HOURS.0..WORK_HOURS.1).contains(&tod) {
        out[base] += 1.0;
    }
    if (BREAK_HOURS.0..BREAK_HOURS.1).contains(&tod) {
        out[base + 1] += 1.0;
    }
    out[base + 2] += 1.0;
}

pub struct CheckinIndex {
    grid: SpatialGrid<(u64, i64)>,
}

impl CheckinIndex {
    pub fn new(checkins: &[Checkin], cell_size: f64) -> Self {
        let mut grid = SpatialGrid::new(cell_size);
        for c in checkins {
            grid.insert(c.location, (c.user_id, bucket_of(c.minute)));
        }
        CheckinIndex { grid }
    }

    pub fn features(&self, point: &Point, radius_m: f64) -> Vec<f64> {
        let mut visits = HashSet::new();
        self.grid.for_each_within(point, radius_m, |_, v, _| {
            visits.insert(*v);
        });
        let mut out = vec![0.0; VISIT_WIDTH];
        for (_, bucket) in visits {
            tally(&mut out, bucket);
        }
        out
    }
}

pub fn visit_features(point: &Point, checkins: &[Checkin], radius_m: f64) -> Vec<f64> {
    CheckinIndex::new(checkins, radius_m.max(1.0)).features(point, radius_m)
}
