use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{AttributeKind, Schema, GEO_FACTORS};
use crate::error::{MugrepError, Result};

use super::mobility::mobility_slots;
use super::population::population_slots;
use super::visit::VISIT_SLOTS;

pub const FEATURES_FILE: &str = "features.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Profile,
    CommunityProfile,
    Temporal,
    Geographical,
    Visit,
    Mobility,
    Population,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Profile,
        FeatureGroup::CommunityProfile,
        FeatureGroup::Temporal,
        FeatureGroup::Geographical,
        FeatureGroup::Visit,
        FeatureGroup::Mobility,
        FeatureGroup::Population,
    ];

    /// The four groups that double as community similarity features.
    pub const AUXILIARY: [FeatureGroup; 4] = [
        FeatureGroup::Geographical,
        FeatureGroup::Visit,
        FeatureGroup::Mobility,
        FeatureGroup::Population,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Profile => "profile",
            FeatureGroup::CommunityProfile => "community_profile",
            FeatureGroup::Temporal => "temporal",
            FeatureGroup::Geographical => "geographical",
            FeatureGroup::Visit => "visit",
            FeatureGroup::Mobility => "mobility",
            FeatureGroup::Population => "population",
        }
    }
}

/// How a slot is treated by the normalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Z-scored with training statistics.
    Numeric,
    OneHot,
    Flag,
    /// Part of an empirical distribution; already in `[0, 1]`.
    Distribution,
}

impl SlotKind {
    pub fn is_numeric(self) -> bool {
        self == SlotKind::Numeric
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub group: FeatureGroup,
    pub name: String,
    pub kind: SlotKind,
}

/// Which auxiliary groups are present. Profile, community profile and
/// temporal groups are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub geographical: bool,
    pub visit: bool,
    pub mobility: bool,
    pub population: bool,
}

impl GroupSelection {
    pub const ALL: GroupSelection = GroupSelection {
        geographical: true,
        visit: true,
        mobility: true,
        population: true,
    };
    pub const NONE: GroupSelection = GroupSelection {
        geographical: false,
        visit: false,
        mobility: false,
        population: false,
    };

    pub fn contains(&self, group: FeatureGroup) -> bool {
        match group {
            FeatureGroup::Geographical => self.geographical,
            FeatureGroup::Visit => self.visit,
            FeatureGroup::Mobility => self.mobility,
            FeatureGroup::Population => self.population,
            _ => true,
        }
    }

    pub fn without(mut self, group: FeatureGroup) -> Self {
        match group {
            FeatureGroup::Geographical => self.geographical = false,
            FeatureGroup::Visit => self.visit = false,
            FeatureGroup::Mobility => self.mobility = false,
            FeatureGroup::Population => self.population = false,
            _ => {}
        }
        self
    }

    pub fn auxiliary(&self) -> Vec<FeatureGroup> {
        FeatureGroup::AUXILIARY
            .into_iter()
            .filter(|g| self.contains(*g))
            .collect()
    }
}

impl Default for GroupSelection {
    fn default() -> Self {
        Self::ALL
    }
}

/// Ordered slots of the per-event input vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub groups: GroupSelection,
    pub slots: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    layout_hash: String,
    width: usize,
    #[serde(flatten)]
    layout: FeatureLayout,
}

impl FeatureLayout {
    pub fn new(schema: &Schema, n_districts: usize, groups: GroupSelection) -> Self {
        let mut slots = Vec::new();
        let mut push = |group, name: String, kind| slots.push(Slot { group, name, kind });

        for a in &schema.estate_attributes {
            match a.kind {
                AttributeKind::Numeric => push(FeatureGroup::Profile, a.name.clone(), SlotKind::Numeric),
                AttributeKind::Categorical => {
                    for v in &a.values {
                        push(FeatureGroup::Profile, format!("{}={v}", a.name), SlotKind::OneHot);
                    }
                }
            }
        }

        let g = FeatureGroup::CommunityProfile;
        for d in &schema.developers {
            push(g, format!("developer={d}"), SlotKind::OneHot);
        }
        for name in ["completion_year", "building_count", "estate_count", "property_fee"] {
            push(g, name.into(), SlotKind::Numeric);
        }
        for m in 0..n_districts {
            push(g, format!("district={m}"), SlotKind::OneHot);
        }

        let g = FeatureGroup::Temporal;
        push(g, "day".into(), SlotKind::Numeric);
        for d in 0..7 {
            push(g, format!("weekday={d}"), SlotKind::OneHot);
        }
        for name in [
            "history.mean",
            "history.variance",
            "history.max",
            "history.min",
            "history.count",
        ] {
            push(g, name.into(), SlotKind::Numeric);
        }
        push(g, "history.missing".into(), SlotKind::Flag);

        if groups.geographical {
            for f in GEO_FACTORS {
                push(FeatureGroup::Geographical, format!("{f}.count"), SlotKind::Numeric);
                push(FeatureGroup::Geographical, format!("{f}.nearest_m"), SlotKind::Numeric);
            }
            push(FeatureGroup::Geographical, "facilities.count".into(), SlotKind::Numeric);
        }
        if groups.visit {
            for s in VISIT_SLOTS {
                push(FeatureGroup::Visit, s.into(), SlotKind::Numeric);
            }
        }
        if groups.mobility {
            for (k, s) in mobility_slots(schema).into_iter().enumerate() {
                let kind = if k < 4 {
                    SlotKind::Numeric
                } else {
                    SlotKind::Distribution
                };
                push(FeatureGroup::Mobility, s, kind);
            }
        }
        if groups.population {
            for (k, s) in population_slots(schema).into_iter().enumerate() {
                let kind = if k == 0 {
                    SlotKind::Numeric
                } else {
                    SlotKind::Distribution
                };
                push(FeatureGroup::Population, s, kind);
            }
        }
        FeatureLayout { groups, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Position of a slot by `group` and name.
    pub fn index_of(&self, group: FeatureGroup, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.group == group && s.name == name)
    }

    /// Contiguous slot range of a group, if present.
    pub fn group_range(&self, group: FeatureGroup) -> Option<Range<usize>> {
        let start = self.slots.iter().position(|s| s.group == group)?;
        let len = self.slots[start..].iter().take_while(|s| s.group == group).count();
        Some(start..start + len)
    }

    /// Hex SHA-256 over the ordered slot list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.slots {
            h.update(s.group.name().as_bytes());
            h.update([0x1f]);
            h.update(s.name.as_bytes());
            h.update([0x1e]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let manifest = Manifest {
            layout_hash: self.hash(),
            width: self.len(),
            layout: self.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, json).map_err(|e| MugrepError::io(path, e))
    }

    pub fn read_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MugrepError::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let layout = manifest.layout;
        if layout.hash() != manifest.layout_hash {
            return Err(MugrepError::LayoutMismatch {
                expected: manifest.layout_hash,
                found: layout.hash(),
            });
        }
        Ok(layout)
    }
}
