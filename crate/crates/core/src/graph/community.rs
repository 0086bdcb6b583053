//! Per-community event windows and the heterogeneous community graph.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{CommunityId, Day, EventId, TransactionEvent};
use crate::error::{MugrepError, Result};
use crate::features::FeatureGroup;

use super::GraphHyperParams;

pub const COMMUNITY_EDGES_FILE: &str = "community_edges.json";
pub const INTRA_INDEX_FILE: &str = "intra_index.bin";

const INTRA_MAGIC: &[u8; 8] = b"MUGREPCI";
const INTRA_VERSION: u32 = 1;

/// Active window over a chronological member list, all dated `<= t`.
///
/// `D` is the gap from the `n_c`-th most recent member to the most recent
/// one (the most recent counts as the first). With fewer than `n_c` members
/// the window is `eps_tau` alone.
fn window(members: &[(EventId, Day)], t: Day, n_c: usize, eps_tau: Day) -> Vec<EventId> {
    let Some(&(_, latest)) = members.last() else {
        return Vec::new();
    };
    let span = if members.len() >= n_c {
        latest - members[members.len() - n_c].1
    } else {
        0
    };
    let w = eps_tau.max(span);
    let start = members.partition_point(|(_, d)| t - d > w);
    members[start..].iter().map(|(id, _)| *id).collect()
}

/// Events of one community active at time `t`: `0 <= t - T_e <= max(eps_tau, D)`.
/// `members` must be sorted by date; members after `t` are ignored.
pub fn active_intra_events(members: &[(EventId, Day)], t: Day, params: &GraphHyperParams) -> Vec<EventId> {
    let upto = members.partition_point(|(_, d)| *d <= t);
    window(&members[..upto], t, params.n_c, params.eps_tau_days)
}

/// Chronological priced events per community.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntraIndex {
    members: BTreeMap<CommunityId, Vec<(EventId, Day)>>,
}

impl IntraIndex {
    pub fn build<'a>(events: impl IntoIterator<Item = &'a TransactionEvent>) -> Self {
        let mut members: BTreeMap<CommunityId, Vec<(EventId, Day)>> = BTreeMap::new();
        for e in events {
            if e.price.is_some() {
                members.entry(e.community_id).or_default().push((e.id, e.date));
            }
        }
        for list in members.values_mut() {
            list.sort_by_key(|&(id, d)| (d, id));
        }
        IntraIndex { members }
    }

    pub fn members(&self, community_id: CommunityId) -> &[(EventId, Day)] {
        self.members.get(&community_id).map_or(&[], Vec::as_slice)
    }

    pub fn communities(&self) -> impl Iterator<Item = CommunityId> + '_ {
        self.members.keys().copied()
    }

    pub fn active_at(&self, community_id: CommunityId, t: Day, params: &GraphHyperParams) -> Vec<EventId> {
        active_intra_events(self.members(community_id), t, params)
    }

    /// Window for a subject valued on `date`: only members strictly before
    /// `date` are considered and gaps are measured from `date`.
    pub fn active_before(&self, community_id: CommunityId, date: Day, params: &GraphHyperParams) -> Vec<EventId> {
        let members = self.members(community_id);
        let upto = members.partition_point(|(_, d)| *d < date);
        window(&members[..upto], date, params.n_c, params.eps_tau_days)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| MugrepError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| MugrepError::io(path, e))
    }

    fn encode(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(INTRA_MAGIC)?;
        w.write_u32::<LittleEndian>(INTRA_VERSION)?;
        w.write_u64::<LittleEndian>(self.members.len() as u64)?;
        for (c, list) in &self.members {
            w.write_u32::<LittleEndian>(*c)?;
            w.write_u64::<LittleEndian>(list.len() as u64)?;
            for (id, d) in list {
                w.write_u32::<LittleEndian>(*id)?;
                w.write_i64::<LittleEndian>(*d)?;
            }
        }
        w.flush()
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| MugrepError::io(path, e))?;
        Self::decode(&mut BufReader::new(file)).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => MugrepError::Checkpoint(format!("{}: {e}", path.display())),
            _ => MugrepError::io(path, e),
        })
    }

    fn decode(r: &mut impl Read) -> std::io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        let version = r.read_u32::<LittleEndian>()?;
        if &magic != INTRA_MAGIC || version != INTRA_VERSION {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "not a version 1 intra index",
            ));
        }
        let n = r.read_u64::<LittleEndian>()?;
        let mut members = BTreeMap::new();
        for _ in 0..n {
            let c = r.read_u32::<LittleEndian>()?;
            let len = r.read_u64::<LittleEndian>()?;
            let list = (0..len)
                .map(|_| Ok((r.read_u32::<LittleEndian>()?, r.read_i64::<LittleEndian>()?)))
                .collect::<std::io::Result<Vec<_>>>()?;
            members.insert(c, list);
        }
        Ok(IntraIndex { members })
    }
}

pub fn pairwise_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MugrepError::ShapeMismatch(format!(
            "feature vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Empirical quantile of ascending `sorted`, taking the element at index
/// `floor(q * (N - 1))`.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let k = (q * (sorted.len() - 1) as f64).floor() as usize;
    Some(sorted[k.min(sorted.len() - 1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    Geographical,
    Visit,
    Mobility,
    Population,
}

impl EdgeType {
    pub const ALL: [EdgeType; 4] = [
        EdgeType::Geographical,
        EdgeType::Visit,
        EdgeType::Mobility,
        EdgeType::Population,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut p = [0.0; 4];
        p[self.index()] = 1.0;
        p
    }

    pub fn feature_group(self) -> FeatureGroup {
        match self {
            EdgeType::Geographical => FeatureGroup::Geographical,
            EdgeType::Visit => FeatureGroup::Visit,
            EdgeType::Mobility => FeatureGroup::Mobility,
            EdgeType::Population => FeatureGroup::Population,
        }
    }

    pub fn from_group(group: FeatureGroup) -> Option<Self> {
        EdgeType::ALL.into_iter().find(|t| t.feature_group() == group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub edge_type: EdgeType,
    pub epsilon: f64,
    /// Unordered pairs stored as `(smaller id, larger id)`.
    pub pairs: Vec<(CommunityId, CommunityId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroCommunityEdges {
    pub sim_quantile: f64,
    pub sets: Vec<EdgeSet>,
    #[serde(skip)]
    adjacency: HashMap<CommunityId, Vec<(CommunityId, EdgeType)>>,
    #[serde(skip)]
    known: Vec<CommunityId>,
}

/// Edge sets from per-type similarity vectors indexed like `ids`.
/// Types absent from `features` get no edge set.
pub fn build_hetero_edges(
    ids: &[CommunityId],
    features: &[(EdgeType, &[Vec<f64>])],
    sim_quantile: f64,
) -> Result<HeteroCommunityEdges> {
    if ids.len() < 2 {
        return Err(MugrepError::TooFewCommunities(ids.len()));
    }
    let n = ids.len();
    let mut sets = Vec::new();
    for (edge_type, vectors) in features {
        if vectors.len() != n {
            return Err(MugrepError::ShapeMismatch(format!(
                "{n} communities but {} {edge_type:?} vectors",
                vectors.len()
            )));
        }
        let mut dist = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                dist.push(pairwise_distance(&vectors[i], &vectors[j])?);
            }
        }
        let mut sorted = dist.clone();
        sorted.sort_by(f64::total_cmp);
        let epsilon = nearest_rank_quantile(&sorted, sim_quantile).unwrap_or(0.0);
        let mut pairs = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                if dist[k] <= epsilon {
                    let (a, b) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                    pairs.push((a, b));
                }
                k += 1;
            }
        }
        pairs.sort_unstable();
        sets.push(EdgeSet {
            edge_type: *edge_type,
            epsilon,
            pairs,
        });
    }
    sets.sort_by_key(|s| s.edge_type);
    Ok(HeteroCommunityEdges::from_sets(sim_quantile, sets, ids.to_vec()))
}

impl HeteroCommunityEdges {
    fn from_sets(sim_quantile: f64, sets: Vec<EdgeSet>, mut known: Vec<CommunityId>) -> Self {
        let mut adjacency: HashMap<CommunityId, Vec<(CommunityId, EdgeType)>> = HashMap::new();
        for s in &sets {
            for &(a, b) in &s.pairs {
                adjacency.entry(a).or_default().push((b, s.edge_type));
                adjacency.entry(b).or_default().push((a, s.edge_type));
            }
        }
        for list in adjacency.values_mut() {
            list.sort_by_key(|&(c, t)| (t, c));
        }
        known.sort_unstable();
        HeteroCommunityEdges {
            sim_quantile,
            sets,
            adjacency,
            known,
        }
    }

    pub fn set(&self, edge_type: EdgeType) -> Option<&EdgeSet> {
        self.sets.iter().find(|s| s.edge_type == edge_type)
    }

    pub fn edge_types(&self) -> Vec<EdgeType> {
        self.sets.iter().map(|s| s.edge_type).collect()
    }

    /// Neighbors across all edge types with the type one-hot. A pair linked
    /// under several types appears once per type.
    pub fn hetero_neighbors(&self, community_id: CommunityId) -> Result<Vec<(CommunityId, [f64; 4])>> {
        if self.known.binary_search(&community_id).is_err() {
            return Err(MugrepError::UnknownCommunity(community_id));
        }
        Ok(self
            .adjacency
            .get(&community_id)
            .map(|l| l.iter().map(|&(c, t)| (c, t.one_hot())).collect())
            .unwrap_or_default())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Out<'a> {
            sim_quantile: f64,
            communities: &'a [CommunityId],
            sets: &'a [EdgeSet],
        }
        let json = serde_json::to_string_pretty(&Out {
            sim_quantile: self.sim_quantile,
            communities: &self.known,
            sets: &self.sets,
        })?;
        std::fs::write(path, json).map_err(|e| MugrepError::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct In {
            sim_quantile: f64,
            communities: Vec<CommunityId>,
            sets: Vec<EdgeSet>,
        }
        let text = std::fs::read_to_string(path).map_err(|e| MugrepError::io(path, e))?;
        let v: In = serde_json::from_str(&text)?;
        Ok(Self::from_sets(v.sim_quantile, v.sets, v.communities))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GraphHyperParams {
        GraphHyperParams::default()
    }

    fn members(days: &[Day]) -> Vec<(EventId, Day)> {
        days.iter().enumerate().map(|(i, d)| (i as EventId, *d)).collect()
    }

    #[test]
    fn window_example() {
        let m = members(&[0, 10, 20, 30, 40, 100]);
        // fifth most recent is day 10, so D = 90 and the window stays 90
        assert_eq!(active_intra_events(&m, 100, &params()), vec![1, 2, 3, 4, 5]);
        assert_eq!(active_intra_events(&members(&[5]), 5, &params()), vec![0]);
        assert!(active_intra_events(&members(&[50]), 49, &params()).is_empty());
    }

    #[test]
    fn long_gaps_widen_the_window() {
        // five events spread over 300 days: D = 300 > 90
        let m = members(&[0, 100, 200, 250, 300]);
        assert_eq!(active_intra_events(&m, 310, &params()), vec![1, 2, 3, 4]);
        assert_eq!(active_intra_events(&m, 300, &params()), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn strict_window_skips_same_day() {
        let idx = IntraIndex::build(&[]);
        assert!(idx.active_before(1, 10, &params()).is_empty());
    }

    #[test]
    fn distance_basics() {
        assert_eq!(pairwise_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            pairwise_distance(&[1.0], &[1.0, 2.0]),
            Err(MugrepError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn quantile_example() {
        // pairwise distances 1 (0-1), 2 (1-2), 3 (0-2)
        let f = vec![vec![0.0], vec![1.0], vec![3.0]];
        let e = build_hetero_edges(&[0, 1, 2], &[(EdgeType::Geographical, &f)], 0.34).unwrap();
        let s = e.set(EdgeType::Geographical).unwrap();
        assert_eq!(s.epsilon, 1.0);
        assert_eq!(s.pairs, vec![(0, 1)]);
    }

    #[test]
    fn identical_vectors_connect_everything() {
        let f = vec![vec![1.0, 1.0]; 4];
        let feats: Vec<(EdgeType, &[Vec<f64>])> = EdgeType::ALL.iter().map(|t| (*t, f.as_slice())).collect();
        let e = build_hetero_edges(&[0, 1, 2, 3], &feats, 0.001).unwrap();
        for s in &e.sets {
            assert_eq!(s.pairs.len(), 6);
        }
        assert_eq!(e.hetero_neighbors(0).unwrap().len(), 12);
    }

    #[test]
    fn multi_type_pairs_give_separate_entries() {
        let near = vec![vec![0.0], vec![0.1], vec![5.0], vec![9.0]];
        let far = vec![vec![0.0], vec![4.0], vec![8.9], vec![9.0]];
        let e = build_hetero_edges(
            &[10, 11, 12, 13],
            &[
                (EdgeType::Geographical, &near),
                (EdgeType::Visit, &far),
                (EdgeType::Mobility, &near),
            ],
            0.01,
        )
        .unwrap();
        assert_eq!(
            e.hetero_neighbors(10).unwrap(),
            vec![(11, [1.0, 0.0, 0.0, 0.0]), (11, [0.0, 0.0, 1.0, 0.0])]
        );
        assert_eq!(e.hetero_neighbors(12).unwrap(), vec![(13, [0.0, 1.0, 0.0, 0.0])]);
        assert!(matches!(e.hetero_neighbors(99), Err(MugrepError::UnknownCommunity(99))));
        assert!(matches!(
            build_hetero_edges(&[1], &[], 0.1),
            Err(MugrepError::TooFewCommunities(1))
        ));
    }
}
