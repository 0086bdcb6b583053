//! Closed enumerations and attribute typing, persisted as `schema.json`.

use serde::{Deserialize, Serialize};

use crate::error::{MugrepError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    /// Inclusive lower bound for numeric attributes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    /// Numeric attributes that must be strictly positive.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub positive: bool,
}

impl AttributeSpec {
    pub fn numeric(name: &str) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttributeKind::Numeric,
            values: Vec::new(),
            min: Some(0.0),
            positive: false,
        }
    }

    pub fn positive(name: &str) -> Self {
        AttributeSpec {
            positive: true,
            ..Self::numeric(name)
        }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttributeKind::Categorical,
            values: values.iter().map(|s| s.to_string()).collect(),
            min: None,
            positive: false,
        }
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// Dataset-wide typing of every categorical column, shared by ingestion,
/// feature assembly and request validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub version: u32,
    /// Columns of `transactions.csv` after the fixed leading columns.
    pub estate_attributes: Vec<AttributeSpec>,
    pub developers: Vec<String>,
    pub poi_categories: Vec<String>,
    pub station_categories: Vec<String>,
    pub travel_modes: Vec<String>,
    pub destination_types: Vec<String>,
    /// Categorical columns of `users.csv` after `community_id`.
    pub user_attributes: Vec<AttributeSpec>,
}

/// Categories the geographical feature group reports on, in slot order.
/// Stations of any kind count as `transportation`.
pub const GEO_FACTORS: [&str; GEO_FACTOR_COUNT] = [
    "transportation",
    "education",
    "medical",
    "shopping",
    "living",
    "entertainment",
    "unpleasantness",
];

pub const GEO_FACTOR_COUNT: usize = 7;

impl Default for Schema {
    fn default() -> Self {
        Schema {
            version: 1,
            estate_attributes: vec![
                AttributeSpec::numeric("rooms"),
                AttributeSpec::positive("area"),
                AttributeSpec::categorical("decoration", &["rough", "simple", "refined"]),
                AttributeSpec::categorical("orientation", &["north", "south", "east", "west"]),
                AttributeSpec::categorical("structure", &["flat", "jump", "duplex"]),
                AttributeSpec::categorical("heating", &["central", "self", "none"]),
                AttributeSpec::categorical("floor_type", &["basement", "low", "medium", "high"]),
                AttributeSpec::categorical("free_of_tax", &["no", "yes"]),
                AttributeSpec::categorical("ownership", &["commercial", "affordable", "public"]),
                AttributeSpec::numeric("floor_number"),
                AttributeSpec::categorical("building_type", &["tower", "slab", "mixed"]),
                AttributeSpec::numeric("elevator_ratio"),
            ],
            developers: (0..8).map(|i| format!("developer_{i}")).collect(),
            poi_categories: GEO_FACTORS[1..].iter().map(|s| s.to_string()).collect(),
            station_categories: vec!["subway".into(), "bus".into()],
            travel_modes: ["drive", "taxi", "bus", "cycle", "walk"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            destination_types: ["enterprise", "administration", "shopping", "entertainment"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            user_attributes: vec![
                AttributeSpec::categorical("hometown", &["local", "north", "south", "east", "west"]),
                AttributeSpec::categorical("gender", &["male", "female"]),
                AttributeSpec::categorical("age", &["teenager", "youth", "middle_aged", "old"]),
                AttributeSpec::categorical("life_stage", &["student", "working", "parent", "retired"]),
                AttributeSpec::categorical("industry", &["education", "catering", "it", "finance", "other"]),
                AttributeSpec::categorical("car_owner", &["no", "yes"]),
                AttributeSpec::categorical("income", &["low", "medium", "high", "very_high"]),
                AttributeSpec::categorical("education", &["senior", "college", "undergraduate", "graduate"]),
                AttributeSpec::categorical("consumption", &["low", "medium", "high"]),
                AttributeSpec::categorical(
                    "consumption_wish",
                    &[
                        "daily_supplies",
                        "education",
                        "healthcare",
                        "travel",
                        "finance",
                        "technology",
                    ],
                ),
            ],
        }
    }
}

impl Schema {
    pub fn estate_attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.estate_attributes.iter().find(|a| a.name == name)
    }

    pub fn user_attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.user_attributes.iter().find(|a| a.name == name)
    }

    /// Index of a POI or station category in [`GEO_FACTORS`].
    pub fn geo_factor(&self, kind: FacilityKind, category: &str) -> Option<usize> {
        match kind {
            FacilityKind::Station => self.station_categories.iter().any(|c| c == category).then_some(0),
            FacilityKind::Poi => {
                if !self.poi_categories.iter().any(|c| c == category) {
                    return None;
                }
                GEO_FACTORS.iter().position(|f| *f == category)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.poi_categories {
            if !GEO_FACTORS[1..].contains(&c.as_str()) {
                return Err(MugrepError::InvalidConfig(format!(
                    "poi category {c:?} is not one of {:?}",
                    &GEO_FACTORS[1..]
                )));
            }
        }
        for a in self.estate_attributes.iter().chain(&self.user_attributes) {
            if a.kind == AttributeKind::Categorical && a.values.is_empty() {
                return Err(MugrepError::InvalidConfig(format!(
                    "categorical attribute {} declares no values",
                    a.name
                )));
            }
        }
        if self
            .user_attributes
            .iter()
            .any(|a| a.kind != AttributeKind::Categorical)
        {
            return Err(MugrepError::InvalidConfig("user attributes must be categorical".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityKind {
    Poi,
    Station,
}
