//! Domain types for transactions, communities and the auxiliary urban records.

mod io;
pub mod schema;
mod split;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{MugrepError, Result};
use crate::geo::Point;

pub use io::{load_dataset, load_dataset_with, write_dataset, CoordinateSystem, LoadOptions};
pub use schema::{AttributeKind, AttributeSpec, FacilityKind, Schema, GEO_FACTORS, GEO_FACTOR_COUNT};
pub use split::{split_chronological, DatasetSplit, Partition};

pub type EventId = u32;
pub type CommunityId = u32;
pub type DistrictId = u32;
/// Integer days since the dataset epoch. Day 0 is a Monday.
pub type Day = i64;

pub const MINUTES_PER_DAY: i64 = 24 * 60;

pub fn is_weekend(day: Day) -> bool {
    day.rem_euclid(7) >= 5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Category(String),
}

impl AttributeValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(v) => Some(*v),
            AttributeValue::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            AttributeValue::Category(s) => Some(s),
            AttributeValue::Number(_) => None,
        }
    }
}

impl std::fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttributeValue::Number(v) => write!(f, "{v}"),
            AttributeValue::Category(s) => f.write_str(s),
        }
    }
}

/// Named estate attributes of one property, typed by [`Schema::estate_attributes`].
pub type EstateAttributes = BTreeMap<String, AttributeValue>;

/// Check every schema attribute is present with the right type and range.
/// Errors name the offending field.
pub fn validate_attributes(schema: &Schema, attrs: &EstateAttributes) -> Result<()> {
    for spec in &schema.estate_attributes {
        let bad = |value: String| MugrepError::InvalidAttribute {
            field: spec.name.clone(),
            value,
        };
        let value = attrs.get(&spec.name).ok_or_else(|| bad("<missing>".into()))?;
        match spec.kind {
            AttributeKind::Numeric => {
                let v = value.as_number().ok_or_else(|| bad(value.to_string()))?;
                let below_min = spec.min.is_some_and(|m| v < m);
                if !v.is_finite() || below_min || (spec.positive && v <= 0.0) {
                    return Err(bad(value.to_string()));
                }
            }
            AttributeKind::Categorical => {
                let c = value.as_category().ok_or_else(|| bad(value.to_string()))?;
                if spec.index_of(c).is_none() {
                    return Err(bad(c.to_string()));
                }
            }
        }
    }
    if let Some(extra) = attrs.keys().find(|k| schema.estate_attribute(k).is_none()) {
        return Err(MugrepError::InvalidAttribute {
            field: extra.clone(),
            value: "<unknown attribute>".into(),
        });
    }
    Ok(())
}

/// One closed sale, or a subject property when `price` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionEvent {
    /// Chronological index.
    pub id: EventId,
    pub location: Point,
    pub date: Day,
    pub community_id: CommunityId,
    pub attributes: EstateAttributes,
    /// Unit price in 10,000 CNY per square meter.
    pub price: Option<f64>,
}

impl TransactionEvent {
    pub fn area(&self) -> Option<f64> {
        self.attributes.get("area").and_then(AttributeValue::as_number)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityProfile {
    pub developer: String,
    pub completion_year: f64,
    pub building_count: f64,
    pub estate_count: f64,
    pub property_fee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: CommunityId,
    pub name: String,
    pub centroid: Point,
    pub district_id: DistrictId,
    pub profile: CommunityProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub kind: FacilityKind,
    pub category: String,
    pub location: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkin {
    pub user_id: u64,
    pub location: Point,
    /// Minutes since the dataset epoch.
    pub minute: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub origin: Point,
    pub destination: Point,
    pub travel_mode: String,
    pub destination_type: String,
    pub is_weekend: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resident {
    pub community_id: CommunityId,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UrbanRecords {
    /// Points of interest and transport stations.
    pub facilities: Vec<Facility>,
    pub checkins: Vec<Checkin>,
    pub trips: Vec<Trip>,
    pub residents: Vec<Resident>,
}

impl UrbanRecords {
    pub fn pois(&self) -> impl Iterator<Item = &Facility> {
        self.facilities.iter().filter(|f| f.kind == FacilityKind::Poi)
    }

    pub fn stations(&self) -> impl Iterator<Item = &Facility> {
        self.facilities.iter().filter(|f| f.kind == FacilityKind::Station)
    }
}

/// A fully resolved dataset: events sorted chronologically with ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub events: Vec<TransactionEvent>,
    pub communities: Vec<Community>,
    pub records: UrbanRecords,
}

impl Dataset {
    /// Map from community id to its position in `communities`.
    pub fn community_index(&self) -> HashMap<CommunityId, usize> {
        self.communities.iter().enumerate().map(|(i, c)| (c.id, i)).collect()
    }

    pub fn community(&self, id: CommunityId) -> Option<&Community> {
        self.communities.iter().find(|c| c.id == id)
    }

    /// Number of districts `M`; district ids span `0..M`.
    pub fn n_districts(&self) -> usize {
        self.communities
            .iter()
            .map(|c| c.district_id as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn event(&self, id: EventId) -> Option<&TransactionEvent> {
        self.events.get(id as usize).filter(|e| e.id == id)
    }

    pub fn latest_date(&self) -> Option<Day> {
        self.events.iter().map(|e| e.date).max()
    }
}
