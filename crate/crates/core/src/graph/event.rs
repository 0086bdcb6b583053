//! The evolving transaction-event graph.
//!
//! An older event `t'` links to a newer event `t` when they are at most
//! `eps_d_m` apart and `0 < T_t - T_t' <= eps_tau_days`. Of the qualifying
//! older events, only the `n_e` most recent from each community are kept.
//! Edges are stored on the newer node as its predecessor list.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{CommunityId, Day, EventId, TransactionEvent};
use crate::error::{MugrepError, Result};
use crate::geo::Point;

use super::GraphHyperParams;

pub const EVENT_GRAPH_FILE: &str = "event_graph.bin";
pub const EVENT_GRAPH_JSON_FILE: &str = "event_graph.json";

const MAGIC: &[u8; 8] = b"MUGREPEG";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub id: EventId,
    pub date: Day,
    pub location: Point,
    pub community_id: CommunityId,
}

impl From<&TransactionEvent> for EventNode {
    fn from(e: &TransactionEvent) -> Self {
        EventNode {
            id: e.id,
            date: e.date,
            location: e.location,
            community_id: e.community_id,
        }
    }
}

type CellKey = (i64, i64);

/// Node positions per grid cell and community, sorted by `(date, id)`.
type Cell = HashMap<CommunityId, Vec<usize>>;

#[derive(Debug, Clone)]
pub struct EventGraph {
    eps_d: f64,
    eps_tau: Day,
    n_e: usize,
    nodes: Vec<EventNode>,
    index: HashMap<EventId, usize>,
    preds: Vec<Vec<EventId>>,
    cells: HashMap<CellKey, Cell>,
}

impl PartialEq for EventGraph {
    fn eq(&self, other: &Self) -> bool {
        self.eps_d == other.eps_d
            && self.eps_tau == other.eps_tau
            && self.n_e == other.n_e
            && self.nodes == other.nodes
            && self.preds == other.preds
    }
}

/// Nodes reachable from a set of roots through at most `k` reverse hops,
/// with every edge among them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    /// Sorted ascending.
    pub nodes: Vec<EventId>,
    /// `(older, newer)` pairs.
    pub edges: Vec<(EventId, EventId)>,
}

#[derive(Serialize, Deserialize)]
struct JsonDump {
    version: u32,
    eps_d_m: f64,
    eps_tau_days: Day,
    n_e: usize,
    nodes: Vec<EventNode>,
    predecessors: Vec<Vec<EventId>>,
}

impl EventGraph {
    pub fn new(params: &GraphHyperParams) -> Self {
        EventGraph {
            eps_d: params.eps_d_m,
            eps_tau: params.eps_tau_days,
            n_e: params.n_e,
            nodes: Vec::new(),
            index: HashMap::new(),
            preds: Vec::new(),
            cells: HashMap::new(),
        }
    }

    /// Insert `events` in order. Ids must be strictly increasing.
    pub fn build<'a>(
        params: &GraphHyperParams,
        events: impl IntoIterator<Item = &'a TransactionEvent>,
    ) -> Result<Self> {
        let mut g = Self::new(params);
        for e in events {
            g.insert(EventNode::from(e))?;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.preds.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[EventNode] {
        &self.nodes
    }

    pub fn node(&self, id: EventId) -> Option<&EventNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    fn key(&self, p: &Point) -> CellKey {
        ((p.x / self.eps_d).floor() as i64, (p.y / self.eps_d).floor() as i64)
    }

    /// Predecessors a node at `location` and `date` would receive, sorted by id.
    fn neighborhood(&self, location: &Point, date: Day) -> Vec<EventId> {
        let (cx, cy) = self.key(location);
        let mut per_community: HashMap<CommunityId, Vec<usize>> = HashMap::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(cell) = self.cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for (community, list) in cell {
                    let before = list.partition_point(|&p| self.nodes[p].date < date);
                    let mut taken = 0;
                    for &p in list[..before].iter().rev() {
                        let n = &self.nodes[p];
                        if date - n.date > self.eps_tau {
                            break;
                        }
                        if n.location.distance(location) <= self.eps_d {
                            per_community.entry(*community).or_default().push(p);
                            taken += 1;
                            if taken == self.n_e {
                                break;
                            }
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        for (_, mut found) in per_community {
            found.sort_by_key(|&p| std::cmp::Reverse((self.nodes[p].date, self.nodes[p].id)));
            out.extend(found.into_iter().take(self.n_e).map(|p| self.nodes[p].id));
        }
        out.sort_unstable();
        out
    }

    pub fn insert(&mut self, node: EventNode) -> Result<()> {
        if self.nodes.last().is_some_and(|last| node.id <= last.id) {
            return Err(MugrepError::DuplicateEvent(node.id));
        }
        let preds = self.neighborhood(&node.location, node.date);
        let pos = self.nodes.len();
        let key = self.key(&node.location);
        self.nodes.push(node);
        self.index.insert(node.id, pos);
        self.preds.push(preds);
        let nodes = &self.nodes;
        let list = self.cells.entry(key).or_default().entry(node.community_id).or_default();
        let at = list.partition_point(|&p| (nodes[p].date, nodes[p].id) <= (node.date, node.id));
        list.insert(at, pos);
        Ok(())
    }

    pub fn predecessors(&self, id: EventId) -> Result<&[EventId]> {
        self.index
            .get(&id)
            .map(|&i| self.preds[i].as_slice())
            .ok_or(MugrepError::UnknownEvent(id))
    }

    /// Neighborhood of a subject property that is not part of the graph.
    /// The graph is not modified.
    pub fn attach_virtual(&self, location: &Point, date: Day) -> Vec<EventId> {
        self.neighborhood(location, date)
    }

    pub fn khop_subgraph(&self, roots: &[EventId], k: usize) -> Result<Subgraph> {
        let mut seen: BTreeSet<EventId> = BTreeSet::new();
        let mut frontier: Vec<EventId> = Vec::new();
        for &r in roots {
            self.predecessors(r)?;
            if seen.insert(r) {
                frontier.push(r);
            }
        }
        for _ in 0..k {
            let mut next = Vec::new();
            for id in frontier {
                for &p in self.predecessors(id)? {
                    if seen.insert(p) {
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        let mut edges = Vec::new();
        for &id in &seen {
            for &p in self.predecessors(id)? {
                if seen.contains(&p) {
                    edges.push((p, id));
                }
            }
        }
        Ok(Subgraph {
            nodes: seen.into_iter().collect(),
            edges,
        })
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| MugrepError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| MugrepError::io(path, e))
    }

    fn encode(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_f64::<LittleEndian>(self.eps_d)?;
        w.write_i64::<LittleEndian>(self.eps_tau)?;
        w.write_u32::<LittleEndian>(self.n_e as u32)?;
        w.write_u64::<LittleEndian>(self.nodes.len() as u64)?;
        for n in &self.nodes {
            w.write_u32::<LittleEndian>(n.id)?;
            w.write_i64::<LittleEndian>(n.date)?;
            w.write_f64::<LittleEndian>(n.location.x)?;
            w.write_f64::<LittleEndian>(n.location.y)?;
            w.write_u32::<LittleEndian>(n.community_id)?;
        }
        // CSR offsets then flattened predecessor ids
        let mut offset = 0u64;
        w.write_u64::<LittleEndian>(0)?;
        for p in &self.preds {
            offset += p.len() as u64;
            w.write_u64::<LittleEndian>(offset)?;
        }
        for p in self.preds.iter().flatten() {
            w.write_u32::<LittleEndian>(*p)?;
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
        let invalid = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not an event graph file"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(invalid(&format!("unsupported event graph version {version}")));
        }
        let params = GraphHyperParams {
            eps_d_m: r.read_f64::<LittleEndian>()?,
            eps_tau_days: r.read_i64::<LittleEndian>()?,
            n_e: r.read_u32::<LittleEndian>()? as usize,
            ..Default::default()
        };
        let n = r.read_u64::<LittleEndian>()? as usize;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(EventNode {
                id: r.read_u32::<LittleEndian>()?,
                date: r.read_i64::<LittleEndian>()?,
                location: Point::new(r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?),
                community_id: r.read_u32::<LittleEndian>()?,
            });
        }
        let offsets = (0..=n)
            .map(|_| r.read_u64::<LittleEndian>().map(|v| v as usize))
            .collect::<std::io::Result<Vec<usize>>>()?;
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("offsets not monotone"));
        }
        let mut flat = vec![0u32; offsets[n]];
        r.read_u32_into::<LittleEndian>(&mut flat)?;
        let preds = offsets.windows(2).map(|w| flat[w[0]..w[1]].to_vec()).collect();
        Ok(Self::from_parts(&params, nodes, preds))
    }

    fn from_parts(params: &GraphHyperParams, nodes: Vec<EventNode>, preds: Vec<Vec<EventId>>) -> Self {
        let mut g = Self::new(params);
        for (pos, node) in nodes.iter().enumerate() {
            g.index.insert(node.id, pos);
            let key = g.key(&node.location);
            g.cells
                .entry(key)
                .or_default()
                .entry(node.community_id)
                .or_default()
                .push(pos);
        }
        g.nodes = nodes;
        let nodes = &g.nodes;
        for cell in g.cells.values_mut() {
            for list in cell.values_mut() {
                list.sort_by_key(|&p| (nodes[p].date, nodes[p].id));
            }
        }
        g.preds = preds;
        g
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let dump = JsonDump {
            version: FORMAT_VERSION,
            eps_d_m: self.eps_d,
            eps_tau_days: self.eps_tau,
            n_e: self.n_e,
            nodes: self.nodes.clone(),
            predecessors: self.preds.clone(),
        };
        let json = serde_json::to_string(&dump)?;
        std::fs::write(path, json).map_err(|e| MugrepError::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MugrepError::io(path, e))?;
        let dump: JsonDump = serde_json::from_str(&text)?;
        let params = GraphHyperParams {
            eps_d_m: dump.eps_d_m,
            eps_tau_days: dump.eps_tau_days,
            n_e: dump.n_e,
            ..Default::default()
        };
        Ok(Self::from_parts(&params, dump.nodes, dump.predecessors))
    }
}
