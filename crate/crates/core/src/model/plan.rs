//! Flattening a batch of subjects into row tables and contiguous edge segments.

use std::collections::HashMap;
use std::sync::Arc;

use crate::autodiff::{Matrix, Segments};
use crate::data::{Day, EventId};
use crate::error::{MugrepError, Result};

use super::world::{ModelWorld, SubjectQuery};
use super::AblationConfig;

/// Edges grouped by center row; centers are a prefix of the node rows.
#[derive(Debug, Clone)]
pub(crate) struct EdgeList {
    pub center: Arc<[usize]>,
    pub neighbor: Arc<[usize]>,
    pub segments: Arc<Segments>,
}

impl EdgeList {
    fn build(per_center: Vec<Vec<usize>>) -> Self {
        let segments = Segments::from_lengths(per_center.iter().map(Vec::len));
        let center: Vec<usize> = per_center
            .iter()
            .enumerate()
            .flat_map(|(c, nbs)| std::iter::repeat_n(c, nbs.len()))
            .collect();
        EdgeList {
            center: center.into(),
            neighbor: per_center.into_iter().flatten().collect::<Vec<_>>().into(),
            segments: Arc::new(segments),
        }
    }

    /// Edges of the first `n_centers` centers.
    pub fn prefix(&self, n_centers: usize) -> (usize, Arc<Segments>) {
        let segs = self.segments.prefix(n_centers);
        (segs.total(), Arc::new(segs))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct InterPlan {
    /// Intra unit of every inter node.
    pub node_unit: Arc<[usize]>,
    /// `level_ends[k]` = number of inter nodes within `k` hops of the roots.
    pub level_ends: Vec<usize>,
    pub edges: EdgeList,
    /// Subject row of each edge, for conditioning the attention.
    pub edge_subject: Arc<[usize]>,
    /// Unit of each edge's neighbor.
    pub edge_unit: Arc<[usize]>,
    pub edge_type: Matrix,
}

/// One minibatch in matrix form. Rows `0..n_subjects` are the subjects;
/// event rows follow in order of hop distance.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub(crate) n_subjects: usize,
    pub(crate) x: Matrix,
    pub(crate) y: Matrix,
    pub(crate) community: Arc<[usize]>,
    pub(crate) district: Arc<[usize]>,
    pub(crate) event_levels: Vec<usize>,
    pub(crate) event_edges: Option<EdgeList>,
    pub(crate) unit_members: Option<(Arc<[usize]>, Arc<Segments>)>,
    pub(crate) inter: Option<InterPlan>,
}

struct RowTable<'w> {
    world: &'w ModelWorld,
    rows: HashMap<EventId, usize>,
    sources: Vec<Row>,
}

enum Row {
    Subject(usize),
    Event(EventId),
}

impl RowTable<'_> {
    fn row(&mut self, id: EventId) -> Result<usize> {
        if let Some(&r) = self.rows.get(&id) {
            return Ok(r);
        }
        if id as usize >= self.world.n_events() {
            return Err(MugrepError::UnknownEvent(id));
        }
        let r = self.sources.len();
        self.sources.push(Row::Event(id));
        self.rows.insert(id, r);
        Ok(r)
    }
}

impl BatchPlan {
    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn build(
        world: &ModelWorld,
        subjects: &[SubjectQuery],
        ablation: AblationConfig,
        n_heads: usize,
    ) -> Result<Self> {
        if subjects.is_empty() {
            return Err(MugrepError::EmptyBatch);
        }
        let n_features = world.n_features();
        let mut district = Vec::with_capacity(subjects.len());
        let mut subject_community = Vec::with_capacity(subjects.len());
        for s in subjects {
            if s.x.len() != n_features {
                return Err(MugrepError::ShapeMismatch(format!(
                    "subject has {} features, model expects {n_features}",
                    s.x.len()
                )));
            }
            subject_community.push(world.community_position(s.community_id)?);
            let head = if ablation.use_multitask {
                s.district_id as usize
            } else {
                0
            };
            if head >= n_heads {
                return Err(MugrepError::UnknownDistrict(s.district_id));
            }
            district.push(head);
        }

        let mut table = RowTable {
            world,
            rows: HashMap::new(),
            sources: (0..subjects.len()).map(Row::Subject).collect(),
        };

        let mut event_levels = vec![subjects.len()];
        let event_edges = if ablation.use_event_module {
            let mut per_center: Vec<Vec<usize>> = Vec::new();
            let mut level_start = 0;
            for _ in 0..world.hyper.l_e {
                let level_end = table.sources.len();
                for r in level_start..level_end {
                    let nbs: &[EventId] = match table.sources[r] {
                        Row::Subject(s) => &subjects[s].neighbors,
                        Row::Event(id) => world.graph.predecessors(id)?,
                    };
                    let mut out = Vec::with_capacity(nbs.len());
                    for &nb in nbs {
                        out.push(table.row(nb)?);
                    }
                    per_center.push(out);
                }
                level_start = level_end;
                event_levels.push(table.sources.len());
            }
            // only the last level has no centers
            event_levels.pop();
            Some(EdgeList::build(per_center))
        } else {
            None
        };

        let (unit_members, inter) = if ablation.use_community_module {
            let mut units: HashMap<(usize, Day), usize> = HashMap::new();
            let mut unit_lists: Vec<Vec<usize>> = Vec::new();
            let mut unit_of = |table: &mut RowTable, community: usize, date: Day| -> Result<usize> {
                if let Some(&u) = units.get(&(community, date)) {
                    return Ok(u);
                }
                let cid = world.community_id_at(community);
                let mut rows = Vec::new();
                for id in world.intra.active_before(cid, date, &world.hyper) {
                    rows.push(table.row(id)?);
                }
                unit_lists.push(rows);
                units.insert((community, date), unit_lists.len() - 1);
                Ok(unit_lists.len() - 1)
            };

            let mut node_unit = Vec::new();
            let mut node_key: Vec<(usize, usize)> = Vec::new();
            let mut per_subject: Vec<HashMap<usize, usize>> = vec![HashMap::new(); subjects.len()];
            for (b, s) in subjects.iter().enumerate() {
                let c = subject_community[b];
                node_unit.push(unit_of(&mut table, c, s.valuation_date)?);
                node_key.push((b, c));
                per_subject[b].insert(c, b);
            }
            let mut level_ends = vec![subjects.len()];
            let mut per_center: Vec<Vec<usize>> = Vec::new();
            let mut edge_subject = Vec::new();
            let mut edge_unit = Vec::new();
            let mut edge_type: Vec<[f64; 4]> = Vec::new();
            let mut level_start = 0;
            for _ in 0..world.hyper.l_c {
                let level_end = node_key.len();
                for n in level_start..level_end {
                    let (b, c) = node_key[n];
                    let date = subjects[b].valuation_date;
                    let mut out = Vec::new();
                    for (nb, one_hot) in world.hetero.hetero_neighbors(world.community_id_at(c))? {
                        let nc = world.community_position(nb)?;
                        let node = match per_subject[b].get(&nc) {
                            Some(&node) => node,
                            None => {
                                node_unit.push(unit_of(&mut table, nc, date)?);
                                node_key.push((b, nc));
                                per_subject[b].insert(nc, node_key.len() - 1);
                                node_key.len() - 1
                            }
                        };
                        out.push(node);
                        edge_subject.push(b);
                        edge_unit.push(node_unit[node]);
                        edge_type.push(one_hot);
                    }
                    per_center.push(out);
                }
                level_start = level_end;
                level_ends.push(node_key.len());
            }
            level_ends.pop();
            let n_edges = edge_type.len();
            let inter = InterPlan {
                node_unit: node_unit.into(),
                level_ends,
                edges: EdgeList::build(per_center),
                edge_subject: edge_subject.into(),
                edge_unit: edge_unit.into(),
                edge_type: Matrix::from_fn(n_edges, 4, |r, c| edge_type[r][c]),
            };
            let segments = Segments::from_lengths(unit_lists.iter().map(Vec::len));
            let members: Vec<usize> = unit_lists.into_iter().flatten().collect();
            (Some((members.into(), Arc::new(segments))), Some(inter))
        } else {
            (None, None)
        };

        let n_rows = table.sources.len();
        let mut x = Matrix::zeros(n_rows, n_features);
        let mut y = Matrix::zeros(n_rows, 1);
        let mut community = Vec::with_capacity(n_rows);
        for (r, src) in table.sources.iter().enumerate() {
            let (features, c) = match *src {
                Row::Subject(s) => (&subjects[s].x[..], subject_community[s]),
                Row::Event(id) => {
                    y[(r, 0)] = world.event_price(id);
                    (world.event_x(id), world.event_community_position(id))
                }
            };
            for (j, v) in features.iter().enumerate() {
                x[(r, j)] = *v;
            }
            community.push(c);
        }

        Ok(BatchPlan {
            n_subjects: subjects.len(),
            x,
            y,
            community: community.into(),
            district: district.into(),
            event_levels,
            event_edges,
            unit_members,
            inter,
        })
    }
}
