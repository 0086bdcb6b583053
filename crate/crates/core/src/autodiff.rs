//! A small reverse-mode differentiation tape over dense matrices.
//!
//! Every value is a `rows x cols` matrix; vectors are single rows or
//! columns. Neighborhood operations work on contiguous row segments so that
//! a whole minibatch of variable-size neighborhoods runs as a few dense
//! products.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MugrepError, Result};

pub type Matrix = DMatrix<f64>;

/// `tanh` through a single `exp`; absolute error stays near machine epsilon.
fn fast_tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Contiguous row segments `[starts[s], starts[s + 1])`. Empty segments are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    starts: Vec<usize>,
}

impl Segments {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut starts = vec![0];
        for l in lengths {
            starts.push(starts.last().unwrap() + l);
        }
        Segments { starts }
    }

    pub fn len(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> usize {
        *self.starts.last().unwrap()
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.starts[s]..self.starts[s + 1]
    }

    /// The first `n` segments.
    pub fn prefix(&self, n: usize) -> Segments {
        Segments {
            starts: self.starts[..=n].to_vec(),
        }
    }
}

type UnaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

enum Op {
    Leaf,
    Param(usize),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Tanh(Var),
    Relu(Var),
    RowDot(Var, Var),
    RowDotVec(Var, Var),
    Gather(Var, Arc<[usize]>),
    ConcatCols(Vec<Var>),
    SegmentSoftmax(Var, Arc<Segments>),
    SegmentWeightedSum(Var, Var, Arc<Segments>),
    Mse(Var, Arc<[f64]>),
    Unary(Var, UnaryFn),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
    consumed: bool,
}

/// Explicit transpose through flat slices; faster than the generic one for small matrices.
fn transposed(m: &Matrix) -> Matrix {
    let (r, c) = (m.nrows(), m.ncols());
    let src = m.as_slice();
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        data.extend((0..c).map(|j| src[j * r + i]));
    }
    Matrix::from_vec(c, r, data)
}

fn shape(m: &Matrix) -> (usize, usize) {
    (m.nrows(), m.ncols())
}

fn mismatch(what: &str, a: (usize, usize), b: (usize, usize)) -> MugrepError {
    MugrepError::ShapeMismatch(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[(0, 0)]
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Parameter `id` of `store`; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id.0) {
            return *v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id.0));
        self.params.insert(id.0, v);
        v
    }

    /// `a * w^T`: applies `w` (`k x d`) to every row of `a` (`n x d`).
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Result<Var> {
        let (av, wv) = (self.value(a), self.value(w));
        if av.ncols() != wv.ncols() {
            return Err(mismatch("matmul_t", shape(av), shape(wv)));
        }
        let out = av * transposed(wv);
        Ok(self.push(out, Op::MatMulT(a, w)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if shape(av) != shape(bv) {
            return Err(mismatch("add", shape(av), shape(bv)));
        }
        let out = av + bv;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds the row vector `b` (`1 x k`) to every row of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.nrows() != 1 || bv.ncols() != av.ncols() {
            return Err(mismatch("add_bias", shape(av), shape(bv)));
        }
        let mut out = av.clone();
        for mut row in out.row_iter_mut() {
            row += bv.row(0);
        }
        Ok(self.push(out, Op::AddBias(a, b)))
    }

    /// Affine map `a * w^T + b`.
    pub fn affine(&mut self, a: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul_t(a, w)?;
        match b {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(fast_tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Elementwise map with a caller-supplied derivative.
    pub fn map_unary(
        &mut self,
        a: Var,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Var {
        let out = self.value(a).map(f);
        self.push(out, Op::Unary(a, Arc::new(df)))
    }

    /// Row-wise dot products of two `n x k` matrices, giving `n x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if shape(av) != shape(bv) {
            return Err(mismatch("row_dot", shape(av), shape(bv)));
        }
        let out = Matrix::from_fn(av.nrows(), 1, |r, _| av.row(r).dot(&bv.row(r)));
        Ok(self.push(out, Op::RowDot(a, b)))
    }

    /// Dot product of every row of `a` with the row vector `v`, giving `n x 1`.
    pub fn row_dot_vec(&mut self, a: Var, v: Var) -> Result<Var> {
        let (av, vv) = (self.value(a), self.value(v));
        if vv.nrows() != 1 || vv.ncols() != av.ncols() {
            return Err(mismatch("row_dot_vec", shape(av), shape(vv)));
        }
        let out = av * transposed(vv);
        Ok(self.push(out, Op::RowDotVec(a, v)))
    }

    /// Rows of `a` picked by `idx`, repeats allowed. Also serves as embedding lookup.
    pub fn gather(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Result<Var> {
        let idx: Arc<[usize]> = idx.into();
        let av = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= av.nrows()) {
            return Err(MugrepError::ShapeMismatch(format!(
                "gather row {bad} from {} rows",
                av.nrows()
            )));
        }
        let (n, m) = (av.nrows(), idx.len());
        let src = av.as_slice();
        let mut data = Vec::with_capacity(m * av.ncols());
        for c in 0..av.ncols() {
            let col = &src[c * n..(c + 1) * n];
            data.extend(idx.iter().map(|&i| col[i]));
        }
        let out = Matrix::from_vec(m, av.ncols(), data);
        Ok(self.push(out, Op::Gather(a, idx)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |p| self.value(*p).nrows());
        if let Some(p) = parts.iter().find(|p| self.value(**p).nrows() != rows) {
            return Err(mismatch("concat_cols", (rows, 0), shape(self.value(*p))));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).ncols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            let v = self.value(*p);
            out.view_mut((0, c0), (rows, v.ncols())).copy_from(v);
            c0 += v.ncols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Softmax of an `n x 1` score column within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segments: Arc<Segments>) -> Result<Var> {
        let sv = self.value(scores);
        if sv.ncols() != 1 || sv.nrows() != segments.total() {
            return Err(mismatch("segment_softmax", shape(sv), (segments.total(), 1)));
        }
        let mut out = Matrix::zeros(sv.nrows(), 1);
        for s in 0..segments.len() {
            let r = segments.range(s);
            if r.is_empty() {
                continue;
            }
            let max = r.clone().map(|i| sv[(i, 0)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for i in r.clone() {
                out[(i, 0)] = (sv[(i, 0)] - max).exp();
                sum += out[(i, 0)];
            }
            for i in r {
                out[(i, 0)] /= sum;
            }
        }
        Ok(self.push(out, Op::SegmentSoftmax(scores, segments)))
    }

    /// Softmax over a single non-empty score column.
    pub fn softmax(&mut self, scores: Var) -> Result<Var> {
        let n = self.value(scores).nrows();
        if n == 0 {
            return Err(MugrepError::EmptySoftmax);
        }
        self.segment_softmax(scores, Arc::new(Segments::from_lengths([n])))
    }

    /// `out[s] = sum over rows r in segment s of alpha[r] * h[r]`; empty segments give zeros.
    pub fn segment_weighted_sum(&mut self, alpha: Var, h: Var, segments: Arc<Segments>) -> Result<Var> {
        let (av, hv) = (self.value(alpha), self.value(h));
        if av.ncols() != 1 || av.nrows() != hv.nrows() || hv.nrows() != segments.total() {
            return Err(mismatch("segment_weighted_sum", shape(av), shape(hv)));
        }
        let mut out = Matrix::zeros(segments.len(), hv.ncols());
        for s in 0..segments.len() {
            for r in segments.range(s) {
                let a = av[(r, 0)];
                for c in 0..hv.ncols() {
                    out[(s, c)] += a * hv[(r, c)];
                }
            }
        }
        Ok(self.push(out, Op::SegmentWeightedSum(alpha, h, segments)))
    }

    /// Mean squared error of an `n x 1` prediction column.
    pub fn mse(&mut self, pred: Var, target: impl Into<Arc<[f64]>>) -> Result<Var> {
        let target: Arc<[f64]> = target.into();
        let pv = self.value(pred);
        if pv.ncols() != 1 || pv.nrows() != target.len() {
            return Err(mismatch("mse", shape(pv), (target.len(), 1)));
        }
        if target.is_empty() {
            return Err(MugrepError::EmptyBatch);
        }
        let n = target.len() as f64;
        let loss = pv.iter().zip(target.iter()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
        Ok(self.push(Matrix::from_element(1, 1, loss), Op::Mse(pred, target)))
    }

    /// Reverse pass from a scalar `loss`. A tape supports one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(MugrepError::StaleTape);
        }
        let lv = self.value(loss);
        if shape(lv) != (1, 1) {
            return Err(MugrepError::NonScalarLoss(lv.len()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_element(1, 1, 1.0));
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
                Some(existing) => *existing += d,
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate(*id, g),
                Op::MatMulT(a, w) => {
                    let (av, wv) = (&self.nodes[a.0].value, &self.nodes[w.0].value);
                    acc(*a, &g * wv);
                    acc(*w, g.tr_mul(av));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddBias(a, b) => {
                    acc(*b, Matrix::from_fn(1, g.ncols(), |_, c| g.column(c).sum()));
                    acc(*a, g);
                }
                Op::Tanh(a) => acc(*a, g.zip_map(&node.value, |d, y| d * (1.0 - y * y))),
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    acc(*a, g.zip_map(av, |d, x| if x > 0.0 { d } else { 0.0 }));
                }
                Op::Unary(a, df) => {
                    let av = &self.nodes[a.0].value;
                    acc(*a, g.zip_map(av, |d, x| d * df(x)));
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut da = bv.clone();
                    let mut db = av.clone();
                    for r in 0..g.nrows() {
                        da.row_mut(r).scale_mut(g[(r, 0)]);
                        db.row_mut(r).scale_mut(g[(r, 0)]);
                    }
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::RowDotVec(a, v) => {
                    let (av, vv) = (&self.nodes[a.0].value, &self.nodes[v.0].value);
                    acc(*v, g.tr_mul(av));
                    acc(*a, &g * vv);
                }
                Op::Gather(a, idx) => {
                    let av = &self.nodes[a.0].value;
                    let mut da = Matrix::zeros(av.nrows(), av.ncols());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut row = da.row_mut(src);
                        row += g.row(r);
                    }
                    acc(*a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.ncols();
                        acc(*p, g.columns(c0, w).into_owned());
                        c0 += w;
                    }
                }
                Op::SegmentSoftmax(s, segs) => {
                    let y = &node.value;
                    let mut ds = Matrix::zeros(y.nrows(), 1);
                    for k in 0..segs.len() {
                        let r = segs.range(k);
                        let dot: f64 = r.clone().map(|i| y[(i, 0)] * g[(i, 0)]).sum();
                        for i in r {
                            ds[(i, 0)] = y[(i, 0)] * (g[(i, 0)] - dot);
                        }
                    }
                    acc(*s, ds);
                }
                Op::SegmentWeightedSum(alpha, h, segs) => {
                    let (av, hv) = (&self.nodes[alpha.0].value, &self.nodes[h.0].value);
                    let mut da = Matrix::zeros(av.nrows(), 1);
                    let mut dh = Matrix::zeros(hv.nrows(), hv.ncols());
                    for k in 0..segs.len() {
                        for r in segs.range(k) {
                            da[(r, 0)] = g.row(k).dot(&hv.row(r));
                            let a = av[(r, 0)];
                            for c in 0..hv.ncols() {
                                dh[(r, c)] = a * g[(k, c)];
                            }
                        }
                    }
                    acc(*alpha, da);
                    acc(*h, dh);
                }
                Op::Mse(p, target) => {
                    let pv = &self.nodes[p.0].value;
                    let n = target.len() as f64;
                    let scale = g[(0, 0)] * 2.0 / n;
                    let dp = Matrix::from_fn(pv.nrows(), 1, |r, _| scale * (pv[(r, 0)] - target[r]));
                    acc(*p, dp);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Gradients per parameter id; parameters not reached by the loss have none.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: HashMap<usize, Matrix>,
}

impl Gradients {
    fn accumulate(&mut self, id: usize, g: Matrix) {
        match self.by_param.get_mut(&id) {
            Some(existing) => *existing += g,
            None => {
                self.by_param.insert(id, g);
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.by_param.get(&id.0)
    }
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weight initialized uniformly in `±sqrt(6 / (rows + cols))`.
    pub fn add_weight(&mut self, name: &str, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        self.add_uniform(name, rows, cols, glorot_bound(cols, rows), rng)
    }

    pub fn add_uniform(&mut self, name: &str, rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> ParamId {
        let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound));
        self.insert(name, m)
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Matrix::zeros(rows, cols))
    }

    pub fn insert(&mut self, name: &str, value: Matrix) -> ParamId {
        self.names.push(name.to_string());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.len()).sum()
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    #[serde(skip)]
    m: Vec<Matrix>,
    #[serde(skip)]
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update of every parameter. Parameters without a gradient are
    /// treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if self.m.len() != store.len() {
            self.m = store
                .values
                .iter()
                .map(|p| Matrix::zeros(p.nrows(), p.ncols()))
                .collect();
            self.v = self.m.clone();
        }
        for id in store.ids() {
            if let Some(g) = grads.get(id) {
                if shape(g) != shape(store.value(id)) {
                    return Err(mismatch(store.name(id), shape(store.value(id)), shape(g)));
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for id in store.ids() {
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = &mut store.values[id.0];
            let g = grads.get(id);
            for k in 0..p.len() {
                let gk = g.map_or(0.0, |g| g[k]);
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                p[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.params
            .iter()
            .filter(|p| !(p.max_rel_err < self.tolerance))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Denominator floor for relative gradient errors. Central differences at
/// h = 1e-5 carry roundoff near 1e-10 for O(1) losses, so relative errors of
/// gradients much smaller than this floor are noise.
pub const REL_ERR_FLOOR: f64 = 1e-5;

/// Compares analytic gradients of `loss_fn` with central differences of step `h`.
/// Relative error is `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn finite_diff_check<F>(store: &mut ParamStore, loss_fn: F, h: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    let grads = tape.backward(loss)?;
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = loss_fn(&mut t, store)?;
        Ok(t.scalar(l))
    };
    let mut params = Vec::new();
    for id in store.ids().collect::<Vec<_>>() {
        let n = store.value(id).len();
        let mut worst_rel: f64 = 0.0;
        let mut worst_abs: f64 = 0.0;
        for k in 0..n {
            let orig = store.value(id)[k];
            store.value_mut(id)[k] = orig + h;
            let up = eval(store)?;
            store.value_mut(id)[k] = orig - h;
            let down = eval(store)?;
            store.value_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            worst_rel = worst_rel.max(rel);
            worst_abs = worst_abs.max(abs);
        }
        params.push(ParamCheck {
            name: store.name(id).to_string(),
            max_rel_err: worst_rel,
            max_abs_err: worst_abs,
        });
    }
    Ok(GradCheckReport { params, tolerance })
}
