//! Reverse-mode automatic differentiation over [`DenseMatrix`] values.
//!
//! A [`Tape`] records every primitive in execution order, so the op list is
//! topologically sorted by construction. [`Tape::backward`] walks it once in
//! reverse, skipping nodes that no differentiable leaf depends on.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::adj::SparseWeightedAdj;
use super::csr::CsrMatrix;
use super::matrix::{argmax, dot, softmax, DenseMatrix};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    SparseMatMul(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Mask(Var, DenseMatrix),
    ScatterAddRows {
        base: Var,
        rows: Vec<usize>,
        delta: Var,
    },
    GcnNorm {
        adj: Arc<SparseWeightedAdj>,
        weights: Var,
        degrees: Vec<f64>,
    },
    SpmmAgg {
        adj: Arc<SparseWeightedAdj>,
        weights: Var,
        coef: Var,
        h: Var,
    },
    MeanAgg {
        adj: Arc<SparseWeightedAdj>,
        weights: Var,
        h: Var,
        totals: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: Vec<Vec<f64>>,
    },
    Sum(Var),
    SumSquares(Var),
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: DenseMatrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id {
            return Err(Error::UnknownSlot);
        }
        self.nodes.get(v.index).ok_or(Error::UnknownSlot)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.index].needs_grad
    }

    /// A differentiable slot.
    pub fn leaf(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.check(v).expect("var belongs to this tape").value
    }

    pub fn try_value(&self, v: Var) -> Result<&DenseMatrix> {
        Ok(&self.check(v)?.value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.check(a)?.value.matmul(&self.check(b)?.value)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Constant sparse matrix times a tape value; only `b` is differentiable.
    pub fn sparse_matmul(&mut self, a: &Arc<CsrMatrix>, b: Var) -> Result<Var> {
        let value = a.matmul(&self.check(b)?.value)?;
        let ng = self.needs(b);
        Ok(self.push(value, Op::SparseMatMul(Arc::clone(a), b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (&self.check(a)?.value, &self.check(b)?.value);
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut value = va.clone();
        value.add_assign(vb);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    /// Adds a `1 x C` row to every row of an `R x C` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (&self.check(a)?.value, &self.check(row)?.value);
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + row {:?}", va.shape(), vr.shape()),
            ));
        }
        let mut value = va.clone();
        let r = vr.row(0).to_vec();
        for i in 0..value.rows() {
            for (o, b) in value.row_mut(i).iter_mut().zip(&r) {
                *o += b;
            }
        }
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    /// Elementwise `max(0, x)`; the subgradient at exactly 0 is 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let mut value = self.check(a)?.value.clone();
        for v in value.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let ng = self.needs(a);
        Ok(self.push(value, Op::Relu(a), ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let mut value = self.check(a)?.value.clone();
        value.scale_in_place(c);
        let ng = self.needs(a);
        Ok(self.push(value, Op::Scale(a, c), ng))
    }

    /// Multiplies by a differentiable `1 x 1` scalar.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let vs = &self.check(s)?.value;
        if vs.shape() != (1, 1) {
            return Err(Error::shape("scale_by", format!("scalar {:?}", vs.shape())));
        }
        let c = vs.item();
        let mut value = self.check(a)?.value.clone();
        value.scale_in_place(c);
        let ng = self.needs(a) || self.needs(s);
        Ok(self.push(value, Op::ScaleBy(a, s), ng))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, a: Var, mask: DenseMatrix) -> Result<Var> {
        let va = &self.check(a)?.value;
        if va.shape() != mask.shape() {
            return Err(Error::shape(
                "mask",
                format!("{:?} * {:?}", va.shape(), mask.shape()),
            ));
        }
        let mut value = va.clone();
        for (v, m) in value.data_mut().iter_mut().zip(mask.data()) {
            *v *= m;
        }
        let ng = self.needs(a);
        Ok(self.push(value, Op::Mask(a, mask), ng))
    }

    /// `out = base; out[rows[i]] += delta[i]`.
    pub fn scatter_add_rows(&mut self, base: Var, rows: &[usize], delta: Var) -> Result<Var> {
        let (vb, vd) = (&self.check(base)?.value, &self.check(delta)?.value);
        if vd.rows() != rows.len() || vd.cols() != vb.cols() {
            return Err(Error::shape(
                "scatter_add_rows",
                format!("{} rows of {:?} into {:?}", rows.len(), vd.shape(), vb.shape()),
            ));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= vb.rows()) {
            return Err(Error::Index(format!("row {r} of {}", vb.rows())));
        }
        let mut value = vb.clone();
        for (i, &r) in rows.iter().enumerate() {
            for (o, d) in value.row_mut(r).iter_mut().zip(vd.row(i)) {
                *o += d;
            }
        }
        let ng = self.needs(base) || self.needs(delta);
        Ok(self.push(
            value,
            Op::ScatterAddRows {
                base,
                rows: rows.to_vec(),
                delta,
            },
            ng,
        ))
    }

    /// Symmetric GCN coefficients `1 / sqrt(d_u d_v)` for every aggregation
    /// entry (edges, then self-loops), where `d` is the self-loop-augmented
    /// weighted degree. The adjacency must carry self-loops.
    pub fn gcn_norm(&mut self, adj: &Arc<SparseWeightedAdj>, weights: Var) -> Result<Var> {
        let w = &self.check(weights)?.value;
        check_weights(adj, w, "gcn_norm")?;
        if !adj.has_self_loops() {
            return Err(Error::shape("gcn_norm", "adjacency without self-loops"));
        }
        let degrees = adj.augmented_degrees(w.data());
        let mut coef = Vec::with_capacity(adj.num_entries());
        for &(u, v) in adj.edges() {
            coef.push(1.0 / (degrees[u] * degrees[v]).sqrt());
        }
        for d in &degrees {
            coef.push(1.0 / d);
        }
        let ng = self.needs(weights);
        Ok(self.push(
            DenseMatrix::column(&coef),
            Op::GcnNorm {
                adj: Arc::clone(adj),
                weights,
                degrees,
            },
            ng,
        ))
    }

    /// `out[v] = sum over entries (u, v) of coef * weight * h[u]`, with each
    /// undirected edge contributing in both directions and self-loops using
    /// weight 1.
    pub fn spmm_agg(
        &mut self,
        adj: &Arc<SparseWeightedAdj>,
        weights: Var,
        coef: Var,
        h: Var,
    ) -> Result<Var> {
        let (w, c, vh) = (
            &self.check(weights)?.value,
            &self.check(coef)?.value,
            &self.check(h)?.value,
        );
        check_weights(adj, w, "spmm_agg")?;
        if c.shape() != (adj.num_entries(), 1) {
            return Err(Error::shape(
                "spmm_agg",
                format!("{:?} coefficients for {} entries", c.shape(), adj.num_entries()),
            ));
        }
        if vh.rows() != adj.n() {
            return Err(Error::shape(
                "spmm_agg",
                format!("{} feature rows for {} nodes", vh.rows(), adj.n()),
            ));
        }
        let cols = vh.cols();
        let mut out = DenseMatrix::zeros(adj.n(), cols);
        let (w, c) = (w.data(), c.data());
        for (e, &(u, v)) in adj.edges().iter().enumerate() {
            let s = c[e] * w[e];
            if s == 0.0 {
                continue;
            }
            axpy(out.row_mut(v), s, vh.row(u));
            axpy(out.row_mut(u), s, vh.row(v));
        }
        if adj.has_self_loops() {
            let base = adj.num_edges();
            for v in 0..adj.n() {
                axpy(out.row_mut(v), c[base + v], vh.row(v));
            }
        }
        let ng = self.needs(weights) || self.needs(coef) || self.needs(h);
        Ok(self.push(
            out,
            Op::SpmmAgg {
                adj: Arc::clone(adj),
                weights,
                coef,
                h,
            },
            ng,
        ))
    }

    /// Weighted neighbour mean `sum(w h[u]) / sum(w)`; nodes whose incident
    /// weights sum to zero get a zero row. Self-loops are ignored.
    pub fn mean_agg(&mut self, adj: &Arc<SparseWeightedAdj>, weights: Var, h: Var) -> Result<Var> {
        let (w, vh) = (&self.check(weights)?.value, &self.check(h)?.value);
        check_weights(adj, w, "mean_agg")?;
        if vh.rows() != adj.n() {
            return Err(Error::shape(
                "mean_agg",
                format!("{} feature rows for {} nodes", vh.rows(), adj.n()),
            ));
        }
        let w = w.data();
        let mut totals = vec![0.0; adj.n()];
        for (&(u, v), &we) in adj.edges().iter().zip(w) {
            totals[u] += we;
            totals[v] += we;
        }
        let mut out = DenseMatrix::zeros(adj.n(), vh.cols());
        for (e, &(u, v)) in adj.edges().iter().enumerate() {
            if w[e] == 0.0 {
                continue;
            }
            if totals[v] != 0.0 {
                axpy(out.row_mut(v), w[e] / totals[v], vh.row(u));
            }
            if totals[u] != 0.0 {
                axpy(out.row_mut(u), w[e] / totals[u], vh.row(v));
            }
        }
        let ng = self.needs(weights) || self.needs(h);
        Ok(self.push(
            out,
            Op::MeanAgg {
                adj: Arc::clone(adj),
                weights,
                h,
                totals,
            },
            ng,
        ))
    }

    /// Mean of `-log softmax(logits[row])[label]` over the given rows.
    pub fn cross_entropy(&mut self, logits: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        let vl = &self.check(logits)?.value;
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} rows, {} labels", rows.len(), labels.len()),
            ));
        }
        let mut total = 0.0;
        let mut probs = Vec::with_capacity(rows.len());
        for (&r, &y) in rows.iter().zip(labels) {
            if r >= vl.rows() {
                return Err(Error::Index(format!("logit row {r} of {}", vl.rows())));
            }
            if y >= vl.cols() {
                return Err(Error::Index(format!("label {y} with {} classes", vl.cols())));
            }
            let row = vl.row(r);
            // log-sum-exp as max + ln(1 + rest) keeps tiny losses accurate
            let top = argmax(row);
            let rest: f64 = row
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != top)
                .map(|(_, v)| (v - row[top]).exp())
                .sum();
            total += (row[top] - row[y]) + rest.ln_1p();
            probs.push(softmax(row));
        }
        let value = DenseMatrix::scalar(total / rows.len() as f64);
        let ng = self.needs(logits);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                probs,
            },
            ng,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = DenseMatrix::scalar(self.check(a)?.value.sum());
        let ng = self.needs(a);
        Ok(self.push(value, Op::Sum(a), ng))
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let s = self.check(a)?.value.data().iter().map(|v| v * v).sum();
        let ng = self.needs(a);
        Ok(self.push(DenseMatrix::scalar(s), Op::SumSquares(a), ng))
    }

    /// Exact reverse-mode gradients of a scalar `loss` for every slot.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.check(loss)?;
        if root.value.shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss of shape {:?}", root.value.shape()),
            ));
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(DenseMatrix::scalar(1.0));

        for i in (0..=loss.index).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &DenseMatrix, grads: &mut [Option<DenseMatrix>]) -> Result<()> {
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[a.index].value, &self.nodes[b.index].value);
                if self.needs(*a) {
                    accumulate(grads, *a, g.matmul_transpose_b(vb)?);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, va.transpose_a_matmul(g)?);
                }
            }
            Op::SparseMatMul(a, b) => {
                accumulate(grads, *b, a.transpose_matmul(g)?);
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::AddRow(a, row) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*row) {
                    let mut gr = DenseMatrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gr.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(grads, *row, gr);
                }
            }
            Op::Relu(a) => {
                let va = &self.nodes[a.index].value;
                let mut ga = g.clone();
                for (o, x) in ga.data_mut().iter_mut().zip(va.data()) {
                    if *x <= 0.0 {
                        *o = 0.0;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Scale(a, c) => {
                let mut ga = g.clone();
                ga.scale_in_place(*c);
                accumulate(grads, *a, ga);
            }
            Op::ScaleBy(a, s) => {
                let va = &self.nodes[a.index].value;
                let c = self.nodes[s.index].value.item();
                if self.needs(*a) {
                    let mut ga = g.clone();
                    ga.scale_in_place(c);
                    accumulate(grads, *a, ga);
                }
                if self.needs(*s) {
                    accumulate(grads, *s, DenseMatrix::scalar(dot(g.data(), va.data())));
                }
            }
            Op::Mask(a, mask) => {
                let mut ga = g.clone();
                for (o, m) in ga.data_mut().iter_mut().zip(mask.data()) {
                    *o *= m;
                }
                accumulate(grads, *a, ga);
            }
            Op::ScatterAddRows { base, rows, delta } => {
                if self.needs(*base) {
                    accumulate(grads, *base, g.clone());
                }
                if self.needs(*delta) {
                    accumulate(grads, *delta, g.select_rows(rows));
                }
            }
            Op::GcnNorm {
                adj,
                weights,
                degrees,
            } => {
                // d coef / d degree, then each edge weight feeds both endpoint degrees.
                let gc = g.data();
                let mut g_deg = vec![0.0; adj.n()];
                for (e, &(u, v)) in adj.edges().iter().enumerate() {
                    let c = 1.0 / (degrees[u] * degrees[v]).sqrt();
                    g_deg[u] -= 0.5 * c / degrees[u] * gc[e];
                    g_deg[v] -= 0.5 * c / degrees[v] * gc[e];
                }
                let base = adj.num_edges();
                for (x, d) in degrees.iter().enumerate() {
                    g_deg[x] -= gc[base + x] / (d * d);
                }
                let gw: Vec<f64> = adj.edges().iter().map(|&(u, v)| g_deg[u] + g_deg[v]).collect();
                accumulate(grads, *weights, DenseMatrix::column(&gw));
            }
            Op::SpmmAgg {
                adj,
                weights,
                coef,
                h,
            } => {
                let w = self.nodes[weights.index].value.data();
                let c = self.nodes[coef.index].value.data();
                let vh = &self.nodes[h.index].value;
                let (need_w, need_c, need_h) =
                    (self.needs(*weights), self.needs(*coef), self.needs(*h));
                let mut gw = vec![0.0; adj.num_edges()];
                let mut gc = vec![0.0; adj.num_entries()];
                let mut gh = need_h.then(|| DenseMatrix::zeros(vh.rows(), vh.cols()));
                for (e, &(u, v)) in adj.edges().iter().enumerate() {
                    if need_w || need_c {
                        let inner = dot(g.row(v), vh.row(u)) + dot(g.row(u), vh.row(v));
                        gw[e] = c[e] * inner;
                        gc[e] = w[e] * inner;
                    }
                    if let Some(gh) = gh.as_mut() {
                        let s = c[e] * w[e];
                        if s != 0.0 {
                            axpy(gh.row_mut(u), s, g.row(v));
                            axpy(gh.row_mut(v), s, g.row(u));
                        }
                    }
                }
                if adj.has_self_loops() {
                    let base = adj.num_edges();
                    for v in 0..adj.n() {
                        if need_c {
                            gc[base + v] = dot(g.row(v), vh.row(v));
                        }
                        if let Some(gh) = gh.as_mut() {
                            axpy(gh.row_mut(v), c[base + v], g.row(v));
                        }
                    }
                }
                if need_w {
                    accumulate(grads, *weights, DenseMatrix::column(&gw));
                }
                if need_c {
                    accumulate(grads, *coef, DenseMatrix::column(&gc));
                }
                if let Some(gh) = gh {
                    accumulate(grads, *h, gh);
                }
            }
            Op::MeanAgg {
                adj,
                weights,
                h,
                totals,
            } => {
                let w = self.nodes[weights.index].value.data();
                let vh = &self.nodes[h.index].value;
                let out = &node.value;
                let need_w = self.needs(*weights);
                let mut gw = vec![0.0; adj.num_edges()];
                let mut gh = self.needs(*h).then(|| DenseMatrix::zeros(vh.rows(), vh.cols()));
                for (e, &(u, v)) in adj.edges().iter().enumerate() {
                    // message u -> v, then v -> u
                    for (src, dst) in [(u, v), (v, u)] {
                        let t = totals[dst];
                        if t == 0.0 {
                            continue;
                        }
                        if need_w {
                            gw[e] += (dot(g.row(dst), vh.row(src)) - dot(g.row(dst), out.row(dst))) / t;
                        }
                        if let Some(gh) = gh.as_mut() {
                            if w[e] != 0.0 {
                                axpy(gh.row_mut(src), w[e] / t, g.row(dst));
                            }
                        }
                    }
                }
                if need_w {
                    accumulate(grads, *weights, DenseMatrix::column(&gw));
                }
                if let Some(gh) = gh {
                    accumulate(grads, *h, gh);
                }
            }
            Op::CrossEntropy {
                logits,
                rows,
                labels,
                probs,
            } => {
                let vl = &self.nodes[logits.index].value;
                let scale = g.item() / rows.len() as f64;
                let mut gl = DenseMatrix::zeros(vl.rows(), vl.cols());
                for ((&r, &y), p) in rows.iter().zip(labels).zip(probs) {
                    let row = gl.row_mut(r);
                    for (k, pk) in p.iter().enumerate() {
                        row[k] += scale * (pk - if k == y { 1.0 } else { 0.0 });
                    }
                }
                accumulate(grads, *logits, gl);
            }
            Op::Sum(a) => {
                let va = &self.nodes[a.index].value;
                accumulate(grads, *a, DenseMatrix::filled(va.rows(), va.cols(), g.item()));
            }
            Op::SumSquares(a) => {
                let mut ga = self.nodes[a.index].value.clone();
                ga.scale_in_place(2.0 * g.item());
                accumulate(grads, *a, ga);
            }
        }
        Ok(())
    }
}

fn check_weights(adj: &SparseWeightedAdj, w: &DenseMatrix, op: &'static str) -> Result<()> {
    if w.shape() != (adj.num_edges(), 1) {
        return Err(Error::shape(
            op,
            format!("weights {:?} for {} edges", w.shape(), adj.num_edges()),
        ));
    }
    Ok(())
}

#[inline]
fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

fn accumulate(grads: &mut [Option<DenseMatrix>], v: Var, g: DenseMatrix) {
    match &mut grads[v.index] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<DenseMatrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`; zero when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Result<DenseMatrix> {
        if v.tape != self.tape || v.index >= self.grads.len() {
            return Err(Error::UnknownSlot);
        }
        Ok(match &self.grads[v.index] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.index];
                DenseMatrix::zeros(r, c)
            }
        })
    }

    /// Consumes the stored gradient for `v` without cloning.
    pub fn take(&mut self, v: Var) -> Result<DenseMatrix> {
        if v.tape != self.tape || v.index >= self.grads.len() {
            return Err(Error::UnknownSlot);
        }
        Ok(self.grads[v.index].take().unwrap_or_else(|| {
            let (r, c) = self.shapes[v.index];
            DenseMatrix::zeros(r, c)
        }))
    }
}
