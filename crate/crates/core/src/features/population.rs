//! Resident counts and demographic distributions per community.

use std::collections::HashMap;

use crate::data::{Community, CommunityId, Resident, Schema};

use super::mobility::normalize;

pub fn population_width(schema: &Schema) -> usize {
    1 + schema.user_attributes.iter().map(|a| a.values.len()).sum::<usize>()
}

pub fn population_slots(schema: &Schema) -> Vec<String> {
    let mut names = vec!["residents".to_string()];
    for a in &schema.user_attributes {
        names.extend(a.values.iter().map(|v| format!("{}={v}", a.name)));
    }
    names
}

/// Population vectors for all communities, indexed like `communities`.
/// Unknown attribute values are skipped.
pub fn population_features(schema: &Schema, communities: &[Community], residents: &[Resident]) -> Vec<Vec<f64>> {
    let pos: HashMap<CommunityId, usize> = communities.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let mut out = vec![vec![0.0; population_width(schema)]; communities.len()];
    for r in residents {
        let Some(&i) = pos.get(&r.community_id) else {
            continue;
        };
        out[i][0] += 1.0;
        let mut offset = 1;
        for a in &schema.user_attributes {
            if let Some(k) = r.attributes.get(&a.name).and_then(|v| a.index_of(v)) {
                out[i][offset + k] += 1.0;
            }
            offset += a.values.len();
        }
    }
    for v in &mut out {
        let mut offset = 1;
        for a in &schema.user_attributes {
            normalize(&mut v[offset..offset + a.values.len()]);
            offset += a.values.len();
        }
    }
    out
}
