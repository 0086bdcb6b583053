//! The MugRep network: event-level attention convolution, intra- and
//! inter-community representations, fusion MLP and per-district heads.

mod checkpoint;
mod plan;
pub mod toy;
mod world;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot_bound, Matrix, ParamId, ParamStore, Segments, Tape, Var};
use crate::error::{MugrepError, Result};

pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_FILE, CHECKPOINT_VERSION};
pub use plan::BatchPlan;
pub use world::{ModelWorld, SubjectQuery};

/// Subjects per forward pass when predicting.
pub const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub use_event_module: bool,
    pub use_community_module: bool,
    pub use_multitask: bool,
}

impl AblationConfig {
    pub const FULL: AblationConfig = AblationConfig {
        use_event_module: true,
        use_community_module: true,
        use_multitask: true,
    };
    pub const NO_EVT: AblationConfig = AblationConfig {
        use_event_module: false,
        ..Self::FULL
    };
    pub const NO_COM: AblationConfig = AblationConfig {
        use_community_module: false,
        ..Self::FULL
    };
    pub const NO_MT: AblationConfig = AblationConfig {
        use_multitask: false,
        ..Self::FULL
    };
    /// Both graph modules off and a single head: a plain MLP on x.
    pub const COLLAPSED: AblationConfig = AblationConfig {
        use_event_module: false,
        use_community_module: false,
        use_multitask: false,
    };
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    /// Width of h_e, h_u and h_c.
    pub hidden: usize,
    pub mlp_hidden: usize,
    /// Width of the learned community-id embedding appended to x.
    pub embedding: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            hidden: 32,
            mlp_hidden: 64,
            embedding: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub n_features: usize,
    pub n_communities: usize,
    pub n_districts: usize,
    pub l_e: usize,
    pub l_c: usize,
    pub dims: ModelDims,
}

impl ModelShape {
    pub fn for_world(world: &ModelWorld, dims: ModelDims) -> Self {
        ModelShape {
            n_features: world.n_features(),
            n_communities: world.n_communities(),
            n_districts: world.n_districts(),
            l_e: world.hyper.l_e,
            l_c: world.hyper.l_c,
            dims,
        }
    }

    /// Width of x with the community embedding appended.
    fn x_width(&self) -> usize {
        self.n_features + self.dims.embedding
    }
}

#[derive(Debug, Clone, PartialEq)]
struct EventParams {
    w_subject: ParamId,
    w_neighbor: ParamId,
    v: ParamId,
    conv: Vec<ParamId>,
}

#[derive(Debug, Clone, PartialEq)]
struct CommunityParams {
    w_u: ParamId,
    v_u: ParamId,
    w_hu: ParamId,
    w_subject: ParamId,
    w_neighbor: ParamId,
    v_c: ParamId,
    conv: Vec<ParamId>,
}

#[derive(Debug, Clone, PartialEq)]
struct ParamIds {
    embedding: ParamId,
    event: Option<EventParams>,
    community: Option<CommunityParams>,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    head_w: ParamId,
    head_b: ParamId,
}

/// Attention coefficients of one mechanism, grouped by center.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub alpha: Var,
    pub segments: Arc<Segments>,
}

pub struct ForwardOutput {
    /// `n_subjects x 1` price estimates.
    pub prediction: Var,
    pub event_attention: Option<AttentionOutput>,
    pub intra_attention: Option<AttentionOutput>,
    pub inter_attention: Option<AttentionOutput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MugRep {
    shape: ModelShape,
    ablation: AblationConfig,
    store: ParamStore,
    ids: ParamIds,
}

impl MugRep {
    /// Weights drawn uniformly in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new(shape: ModelShape, ablation: AblationConfig, seed: u64) -> Result<Self> {
        if shape.n_features == 0 || shape.n_communities == 0 || shape.n_districts == 0 {
            return Err(MugrepError::InvalidConfig(
                "model needs features, communities and districts".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let d = shape.x_width();
        let h = shape.dims.hidden;
        let m = shape.dims.mlp_hidden;

        let embedding = s.add_weight("embedding", shape.n_communities, shape.dims.embedding, &mut rng);

        // W_e acts on [x_subject ⊕ x_neighbor ⊕ y_neighbor]; stored as two column blocks
        let event = ablation.use_event_module.then(|| {
            let bound = glorot_bound(2 * d + 1, h);
            let w_subject = s.add_uniform("event.w_subject", h, d, bound, &mut rng);
            let w_neighbor = s.add_uniform("event.w_neighbor", h, d + 1, bound, &mut rng);
            let v = s.add_weight("event.v", 1, h, &mut rng);
            let conv = (1..=shape.l_e)
                .map(|l| {
                    let fan_in = if l == 1 { d + 1 } else { h };
                    s.add_weight(&format!("event.conv{l}"), h, fan_in, &mut rng)
                })
                .collect();
            EventParams {
                w_subject,
                w_neighbor,
                v,
                conv,
            }
        });

        // W_c acts on [x_subject ⊕ h_u ⊕ edge type]
        let community = ablation.use_community_module.then(|| {
            let w_u = s.add_weight("intra.w", h, d + 1, &mut rng);
            let v_u = s.add_weight("intra.v", 1, h, &mut rng);
            let w_hu = s.add_weight("intra.conv", h, d, &mut rng);
            let bound = glorot_bound(d + h + 4, h);
            let w_subject = s.add_uniform("inter.w_subject", h, d, bound, &mut rng);
            let w_neighbor = s.add_uniform("inter.w_neighbor", h, h + 4, bound, &mut rng);
            let v_c = s.add_weight("inter.v", 1, h, &mut rng);
            let conv = (1..=shape.l_c)
                .map(|l| s.add_weight(&format!("inter.conv{l}"), h, h, &mut rng))
                .collect();
            CommunityParams {
                w_u,
                v_u,
                w_hu,
                w_subject,
                w_neighbor,
                v_c,
                conv,
            }
        });

        let w1 = s.add_weight("mlp.w1", m, d + 2 * h, &mut rng);
        let b1 = s.add_zeros("mlp.b1", 1, m);
        let w2 = s.add_weight("mlp.w2", m, m, &mut rng);
        let b2 = s.add_zeros("mlp.b2", 1, m);
        let n_heads = if ablation.use_multitask { shape.n_districts } else { 1 };
        // each head is its own m -> 1 layer
        let head_w = s.add_uniform("heads.w", n_heads, m, glorot_bound(m, 1), &mut rng);
        let head_b = s.add_zeros("heads.b", n_heads, 1);

        Ok(MugRep {
            shape,
            ablation,
            store: s,
            ids: ParamIds {
                embedding,
                event,
                community,
                w1,
                b1,
                w2,
                b2,
                head_w,
                head_b,
            },
        })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn ablation(&self) -> AblationConfig {
        self.ablation
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn n_heads(&self) -> usize {
        self.store.value(self.ids.head_w).nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn plan(&self, world: &ModelWorld, subjects: &[SubjectQuery]) -> Result<BatchPlan> {
        if world.n_features() != self.shape.n_features || world.n_communities() != self.shape.n_communities {
            return Err(MugrepError::ShapeMismatch(format!(
                "world has {} features and {} communities, model expects {} and {}",
                world.n_features(),
                world.n_communities(),
                self.shape.n_features,
                self.shape.n_communities
            )));
        }
        if world.hyper.l_e != self.shape.l_e || world.hyper.l_c != self.shape.l_c {
            return Err(MugrepError::ShapeMismatch(
                "graph depth differs from the model's".into(),
            ));
        }
        BatchPlan::build(world, subjects, self.ablation, self.n_heads())
    }

    /// Records the forward pass of `plan` on `tape`, reading parameters from `store`.
    pub fn forward_with(&self, store: &ParamStore, tape: &mut Tape, plan: &BatchPlan) -> Result<ForwardOutput> {
        let b = plan.n_subjects;
        let h = self.shape.dims.hidden;
        let subject_rows: Arc<[usize]> = (0..b).collect();

        let emb = tape.param(store, self.ids.embedding);
        let x_raw = tape.constant(plan.x.clone());
        let e = tape.gather(emb, plan.community.clone())?;
        let x = tape.concat_cols(&[x_raw, e])?;
        let y = tape.constant(plan.y.clone());
        let h0 = tape.concat_cols(&[x, y])?;
        let x_subject = tape.gather(x, subject_rows.clone())?;

        let (h_e, event_attention) = match (&self.ids.event, &plan.event_edges) {
            (Some(p), Some(edges)) => {
                let n_centers = *plan.event_levels.last().unwrap();
                let centers = tape.gather(x, (0..n_centers).collect::<Vec<_>>())?;
                let w_s = tape.param(store, p.w_subject);
                let w_n = tape.param(store, p.w_neighbor);
                let v = tape.param(store, p.v);
                let a = tape.matmul_t(centers, w_s)?;
                let nb = tape.matmul_t(h0, w_n)?;
                let a_e = tape.gather(a, edges.center.clone())?;
                let nb_e = tape.gather(nb, edges.neighbor.clone())?;
                let pre = tape.add(a_e, nb_e)?;
                let act = tape.tanh(pre);
                let beta = tape.row_dot_vec(act, v)?;
                let alpha = tape.segment_softmax(beta, edges.segments.clone())?;

                let l_e = self.shape.l_e;
                let mut prev = h0;
                for l in 1..=l_e {
                    let n_c = plan.event_levels[l_e - l];
                    let (n_edges, segs) = edges.prefix(n_c);
                    let alpha_l = tape.gather(alpha, (0..n_edges).collect::<Vec<_>>())?;
                    let nb_rows = tape.gather(prev, edges.neighbor[..n_edges].to_vec())?;
                    let mut agg = tape.segment_weighted_sum(alpha_l, nb_rows, segs)?;
                    if l > 1 {
                        let own = tape.gather(prev, (0..n_c).collect::<Vec<_>>())?;
                        agg = tape.add(agg, own)?;
                    }
                    let w = tape.param(store, p.conv[l - 1]);
                    let z = tape.matmul_t(agg, w)?;
                    prev = tape.relu(z);
                }
                (
                    prev,
                    Some(AttentionOutput {
                        alpha,
                        segments: edges.segments.clone(),
                    }),
                )
            }
            _ => (tape.constant(Matrix::zeros(b, h)), None),
        };

        let (h_c, intra_attention, inter_attention) = match (&self.ids.community, &plan.unit_members, &plan.inter) {
            (Some(p), Some((members, unit_segs)), Some(inter)) => {
                let w_u = tape.param(store, p.w_u);
                let v_u = tape.param(store, p.v_u);
                let w_hu = tape.param(store, p.w_hu);
                let m_h0 = tape.gather(h0, members.clone())?;
                let m_x = tape.gather(x, members.clone())?;
                let pre = tape.matmul_t(m_h0, w_u)?;
                let act = tape.tanh(pre);
                let beta = tape.row_dot_vec(act, v_u)?;
                let alpha_u = tape.segment_softmax(beta, unit_segs.clone())?;
                let agg = tape.segment_weighted_sum(alpha_u, m_x, unit_segs.clone())?;
                let z = tape.matmul_t(agg, w_hu)?;
                let h_u = tape.relu(z);

                let w_s = tape.param(store, p.w_subject);
                let w_n = tape.param(store, p.w_neighbor);
                let v_c = tape.param(store, p.v_c);
                let xs = tape.matmul_t(x_subject, w_s)?;
                let xs_e = tape.gather(xs, inter.edge_subject.clone())?;
                let hu_e = tape.gather(h_u, inter.edge_unit.clone())?;
                let types = tape.constant(inter.edge_type.clone());
                let nb_in = tape.concat_cols(&[hu_e, types])?;
                let nb = tape.matmul_t(nb_in, w_n)?;
                let pre = tape.add(xs_e, nb)?;
                let act = tape.tanh(pre);
                let beta = tape.row_dot_vec(act, v_c)?;
                let alpha_c = tape.segment_softmax(beta, inter.edges.segments.clone())?;

                let l_c = self.shape.l_c;
                let mut prev = tape.gather(h_u, inter.node_unit.clone())?;
                for l in 1..=l_c {
                    let n_c = inter.level_ends[l_c - l];
                    let (n_edges, segs) = inter.edges.prefix(n_c);
                    let alpha_l = tape.gather(alpha_c, (0..n_edges).collect::<Vec<_>>())?;
                    let nb_rows = tape.gather(prev, inter.edges.neighbor[..n_edges].to_vec())?;
                    let mut agg = tape.segment_weighted_sum(alpha_l, nb_rows, segs)?;
                    if l > 1 {
                        let own = tape.gather(prev, (0..n_c).collect::<Vec<_>>())?;
                        agg = tape.add(agg, own)?;
                    }
                    let w = tape.param(store, p.conv[l - 1]);
                    let z = tape.matmul_t(agg, w)?;
                    prev = tape.relu(z);
                }
                (
                    prev,
                    Some(AttentionOutput {
                        alpha: alpha_u,
                        segments: unit_segs.clone(),
                    }),
                    Some(AttentionOutput {
                        alpha: alpha_c,
                        segments: inter.edges.segments.clone(),
                    }),
                )
            }
            _ => (tape.constant(Matrix::zeros(b, h)), None, None),
        };

        let fused = tape.concat_cols(&[x_subject, h_e, h_c])?;
        let w1 = tape.param(store, self.ids.w1);
        let b1 = tape.param(store, self.ids.b1);
        let w2 = tape.param(store, self.ids.w2);
        let b2 = tape.param(store, self.ids.b2);
        let z1 = tape.affine(fused, w1, Some(b1))?;
        let a1 = tape.relu(z1);
        let h_o = tape.affine(a1, w2, Some(b2))?;

        let head_w = tape.param(store, self.ids.head_w);
        let head_b = tape.param(store, self.ids.head_b);
        let hw = tape.gather(head_w, plan.district.clone())?;
        let hb = tape.gather(head_b, plan.district.clone())?;
        let dot = tape.row_dot(h_o, hw)?;
        let prediction = tape.add(dot, hb)?;

        Ok(ForwardOutput {
            prediction,
            event_attention,
            intra_attention,
            inter_attention,
        })
    }

    pub fn forward(&self, tape: &mut Tape, plan: &BatchPlan) -> Result<ForwardOutput> {
        self.forward_with(&self.store, tape, plan)
    }

    /// Mean squared error over all subjects of the batch, ignoring districts.
    pub fn batch_loss(&self, tape: &mut Tape, plan: &BatchPlan, targets: &[f64]) -> Result<Var> {
        let out = self.forward(tape, plan)?;
        tape.mse(out.prediction, targets.to_vec())
    }

    /// Price estimates in the units of the training targets.
    pub fn predict(&self, world: &ModelWorld, subjects: &[SubjectQuery]) -> Result<Vec<f64>> {
        let chunks: Vec<Vec<f64>> = subjects
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| {
                let plan = self.plan(world, chunk)?;
                let mut tape = Tape::new();
                let out = self.forward(&mut tape, &plan)?;
                Ok(tape.value(out.prediction).iter().copied().collect())
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}
