use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{CommunityId, Day, TransactionEvent};

/// Length of the look-back window for historical price statistics.
pub const HISTORY_WINDOW_DAYS: Day = 90;

/// Statistics of same-community unit prices closed in the 90 days before
/// valuation. Variance is the population variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoricalPriceStats {
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub min: f64,
    pub count: usize,
    pub missing: bool,
}

impl HistoricalPriceStats {
    pub const MISSING: HistoricalPriceStats = HistoricalPriceStats {
        mean: 0.0,
        variance: 0.0,
        max: 0.0,
        min: 0.0,
        count: 0,
        missing: true,
    };

    pub fn from_prices(prices: &[f64]) -> Self {
        if prices.is_empty() {
            return Self::MISSING;
        }
        let n = prices.len() as f64;
        let mean = prices.iter().sum::<f64>() / n;
        let variance = prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        HistoricalPriceStats {
            mean,
            variance,
            max: prices.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: prices.iter().copied().fold(f64::INFINITY, f64::min),
            count: prices.len(),
            missing: false,
        }
    }
}

/// Window `[valuation_date - 90, valuation_date)` over `history`.
/// Events on or after the valuation date are ignored.
pub fn historical_price_stats(
    community_id: CommunityId,
    valuation_date: Day,
    history: &[TransactionEvent],
) -> HistoricalPriceStats {
    let prices: Vec<f64> = history
        .iter()
        .filter(|e| e.community_id == community_id)
        .filter(|e| e.date < valuation_date && e.date >= valuation_date - HISTORY_WINDOW_DAYS)
        .filter_map(|e| e.price)
        .collect();
    HistoricalPriceStats::from_prices(&prices)
}

/// Per-community chronological price lists for fast window queries.
#[derive(Debug, Clone, Default)]
pub struct PriceHistory {
    by_community: HashMap<CommunityId, Vec<(Day, f64)>>,
}

impl PriceHistory {
    pub fn new(events: &[TransactionEvent]) -> Self {
        let mut by_community: HashMap<CommunityId, Vec<(Day, f64)>> = HashMap::new();
        for e in events {
            if let Some(p) = e.price {
                by_community.entry(e.community_id).or_default().push((e.date, p));
            }
        }
        for v in by_community.values_mut() {
            v.sort_by_key(|(d, _)| *d);
        }
        PriceHistory { by_community }
    }

    /// Prices of the community dated in `[from, until)`.
    pub fn prices_between(&self, community_id: CommunityId, from: Day, until: Day) -> &[(Day, f64)] {
        let Some(list) = self.by_community.get(&community_id) else {
            return &[];
        };
        let lo = list.partition_point(|(d, _)| *d < from);
        let hi = list.partition_point(|(d, _)| *d < until);
        &list[lo..hi.max(lo)]
    }

    pub fn stats(&self, community_id: CommunityId, valuation_date: Day) -> HistoricalPriceStats {
        let window = self.prices_between(community_id, valuation_date - HISTORY_WINDOW_DAYS, valuation_date);
        let prices: Vec<f64> = window.iter().map(|(_, p)| *p).collect();
        HistoricalPriceStats::from_prices(&prices)
    }

    /// Number of priced transactions of the community dated before `until`.
    pub fn count_before(&self, community_id: CommunityId, until: Day) -> usize {
        self.prices_between(community_id, Day::MIN, until).len()
    }
}
