use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gemm::{gemm_acc, View};
use super::{Gradients, NumericsError, ParamId, ParamStore, Result, Tensor};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(ParamId),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add { a: Var, b: Var },
    AddRow { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, s: f64 },
    Sum { a: Var },
    ConcatCols { parts: Vec<Var> },
    ConcatRows { parts: Vec<Var> },
    SliceCols { a: Var, start: usize },
    GatherRows { a: Var, idx: Vec<usize> },
    Softmax { a: Var },
    Gelu { a: Var },
    Relu { a: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Dropout { a: Var, mask: Vec<f64> },
    CrossEntropy { logits: Var, targets: Vec<usize>, weights: Vec<f64>, probs: Vec<f64>, wsum: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Forward-pass recorder. Parameters are read from the borrowed store; a
/// single [`Tape::backward`] call releases the graph.
pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    rng: Option<ChaCha8Rng>,
    consumed: bool,
}

impl<'s> Tape<'s> {
    /// Evaluation-mode tape: dropout is the identity.
    pub fn new(store: &'s ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
            rng: None,
            consumed: false,
        }
    }

    /// Training-mode tape with a seeded dropout stream.
    pub fn training(store: &'s ParamStore, seed: u64) -> Self {
        Tape {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            ..Tape::new(store)
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str, needs_grad: bool) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(NumericsError::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        match s.len() {
            1 => Ok((1, s[0])),
            2 => Ok((s[0], s[1])),
            _ => Err(NumericsError::ShapeMismatch {
                op,
                left: s.to_vec(),
                right: vec![],
            }),
        }
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> NumericsError {
        NumericsError::ShapeMismatch {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    /// Registers a parameter (once per tape) and returns its handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let value = self.store.value(id).clone();
        self.nodes.push(Node {
            value,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) * op(b)` where `op` optionally transposes a 2-D operand.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (ar, ac) = self.matrix_dims(a, "matmul")?;
        let (br, bc) = self.matrix_dims(b, "matmul")?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(
            m,
            k,
            n,
            View::new(self.value(a).data(), ac, ta),
            View::new(self.value(b).data(), bc, tb),
            &mut out,
            n as isize,
            1,
        );
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b, ta, tb }, "matmul", needs)
    }

    /// Elementwise sum of equal shapes, or `a [r, c] + b [c]` broadcast over rows.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let needs = self.needs(a) || self.needs(b);
        if self.shape(a) == self.shape(b) {
            let out: Vec<f64> = self
                .value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x + y)
                .collect();
            let shape = self.shape(a).to_vec();
            return self.push(Tensor::new(shape, out)?, Op::Add { a, b }, "add", needs);
        }
        let cols = self.value(a).cols();
        if self.value(b).len() != cols || self.value(b).rows() != 1 {
            return Err(self.mismatch("add", a, b));
        }
        let bias = self.value(b).data();
        let out: Vec<f64> = self
            .value(a)
            .data()
            .chunks(cols)
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, out)?, Op::AddRow { a, b }, "add", needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("mul", a, b));
        }
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::new(shape, out)?, Op::Mul { a, b }, "mul", needs)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out: Vec<f64> = self.value(a).data().iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, out)?, Op::Scale { a, s }, "scale", needs)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total: f64 = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(total), Op::Sum { a }, "sum", needs)
    }

    /// Concatenation along the last dimension of row-aligned 2-D values.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(NumericsError::InvalidArgument("concat of zero parts".into()));
        };
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(self.mismatch("concat", first, p));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::new(vec![rows, total], out)?,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            "concat",
            needs,
        )
    }

    /// Stacks values with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(NumericsError::InvalidArgument("concat of zero parts".into()));
        };
        let cols = self.value(first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if self.value(p).cols() != cols {
                return Err(self.mismatch("concat_rows", first, p));
            }
            out.extend_from_slice(self.value(p).data());
            rows += self.value(p).rows();
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::new(vec![rows, cols], out)?,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            "concat_rows",
            needs,
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a, "slice")?;
        if start + len > cols {
            return Err(NumericsError::IndexOutOfRange {
                op: "slice",
                index: start + len,
                bound: cols,
            });
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let needs = self.needs(a);
        self.push(Tensor::new(vec![rows, len], out)?, Op::SliceCols { a, start }, "slice", needs)
    }

    /// Selects rows by index; doubles as embedding lookup.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a, "gather")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(NumericsError::IndexOutOfRange {
                op: "gather",
                index: bad,
                bound: rows,
            });
        }
        let src = self.value(a);
        let mut out = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            out.extend_from_slice(src.row(i));
        }
        let needs = self.needs(a);
        self.push(
            Tensor::new(vec![idx.len(), cols], out)?,
            Op::GatherRows { a, idx: idx.to_vec() },
            "gather",
            needs,
        )
    }

    pub fn embedding(&mut self, table: ParamId, ids: &[usize]) -> Result<Var> {
        let t = self.param(table);
        self.gather_rows(t, ids)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let cols = self.value(a).cols();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(cols) {
            softmax_in_place(row);
        }
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, out)?, Op::Softmax { a }, "softmax", needs)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()))
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, out)?, Op::Gelu { a }, "gelu", needs)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out: Vec<f64> = self.value(a).data().iter().map(|&x| x.max(0.0)).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, out)?, Op::Relu { a }, "relu", needs)
    }

    /// Row-wise normalization with learned scale and shift of width `cols`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        if self.value(gamma).len() != cols {
            return Err(self.mismatch("layer_norm", x, gamma));
        }
        if self.value(beta).len() != cols {
            return Err(self.mismatch("layer_norm", x, beta));
        }
        let rows = self.value(x).rows();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = Vec::with_capacity(rows * cols);
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(rows * cols);
        for row in self.value(x).data().chunks(cols) {
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(r);
            for (k, v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(h * g[k] + b[k]);
            }
        }
        let shape = self.shape(x).to_vec();
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm { x, gamma, beta, xhat, rstd },
            "layer_norm",
            needs,
        )
    }

    /// Inverted dropout; the identity outside training mode or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(NumericsError::InvalidArgument(format!("dropout rate {p}")));
        }
        let Some(rng) = self.rng.as_mut() else { return Ok(a) };
        if p == 0.0 {
            return Ok(a);
        }
        let n = self.nodes[a.0].value.len();
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, out)?, Op::Dropout { a, mask }, "dropout", needs)
    }

    /// Weighted mean cross-entropy of `logits [n, k]` against class ids:
    /// `sum_i w_i * CE_i / sum_i w_i`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: Option<&[f64]>) -> Result<Var> {
        let (n, k) = self.matrix_dims(logits, "cross_entropy")?;
        if targets.is_empty() || targets.len() != n {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                left: self.shape(logits).to_vec(),
                right: vec![targets.len()],
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(NumericsError::IndexOutOfRange {
                op: "cross_entropy",
                index: bad,
                bound: k,
            });
        }
        let weights = match weights {
            Some(w) if w.len() == n => w.to_vec(),
            Some(w) => {
                return Err(NumericsError::ShapeMismatch {
                    op: "cross_entropy",
                    left: vec![n],
                    right: vec![w.len()],
                })
            }
            None => vec![1.0; n],
        };
        let wsum: f64 = weights.iter().sum();
        if wsum <= 0.0 {
            return Err(NumericsError::InvalidArgument("weights sum to zero".into()));
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = 0.0;
        for (r, row) in probs.chunks_mut(k).enumerate() {
            let lse = softmax_in_place(row);
            let z = self.nodes[logits.0].value.data()[r * k + targets[r]];
            loss += weights[r] * (lse - z);
        }
        let needs = self.needs(logits);
        self.push(
            Tensor::scalar(loss / wsum),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights,
                probs,
                wsum,
            },
            "cross_entropy",
            needs,
        )
    }

    /// Reverse pass from a scalar `loss`, returning gradients for every
    /// parameter it depends on. The recorded graph is freed afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(NumericsError::GraphConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(NumericsError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;
        let nodes = std::mem::take(&mut self.nodes);
        self.params.clear();

        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.entries.push((*id, g)),
                Op::MatMul { a, b, ta, tb } => {
                    let av = &nodes[a.0].value;
                    let bv = &nodes[b.0].value;
                    let (ac, bc) = (av.cols(), bv.cols());
                    let (m, n) = (node.value.rows(), node.value.cols());
                    let k = if *ta { av.rows() } else { ac };
                    let gv = View::new(&g, n, false);
                    if let Some(da) = slot(&mut grads, &nodes, *a) {
                        let (rs, cs) = if *ta { (1, ac as isize) } else { (ac as isize, 1) };
                        gemm_acc(m, n, k, gv, View::new(bv.data(), bc, *tb).t(), da, rs, cs);
                    }
                    if let Some(db) = slot(&mut grads, &nodes, *b) {
                        let (rs, cs) = if *tb { (1, bc as isize) } else { (bc as isize, 1) };
                        gemm_acc(k, m, n, View::new(av.data(), ac, *ta).t(), gv, db, rs, cs);
                    }
                }
                Op::Add { a, b } => {
                    for v in [*a, *b] {
                        if let Some(d) = slot(&mut grads, &nodes, v) {
                            axpy(d, &g, 1.0);
                        }
                    }
                }
                Op::AddRow { a, b } => {
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        axpy(d, &g, 1.0);
                    }
                    if let Some(d) = slot(&mut grads, &nodes, *b) {
                        let cols = d.len();
                        for row in g.chunks(cols) {
                            axpy(d, row, 1.0);
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for ((d, g), y) in d.iter_mut().zip(&g).zip(bv) {
                            *d += g * y;
                        }
                    }
                    if let Some(d) = slot(&mut grads, &nodes, *b) {
                        for ((d, g), x) in d.iter_mut().zip(&g).zip(av) {
                            *d += g * x;
                        }
                    }
                }
                Op::Scale { a, s } => {
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        axpy(d, &g, *s);
                    }
                }
                Op::Sum { a } => {
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        d.iter_mut().for_each(|x| *x += g[0]);
                    }
                }
                Op::ConcatCols { parts } => {
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = nodes[p.0].value.cols();
                        if let Some(d) = slot(&mut grads, &nodes, p) {
                            for (drow, grow) in d.chunks_mut(w).zip(g.chunks(total)) {
                                axpy(drow, &grow[offset..offset + w], 1.0);
                            }
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = nodes[p.0].value.len();
                        if let Some(d) = slot(&mut grads, &nodes, p) {
                            axpy(d, &g[offset..offset + n], 1.0);
                        }
                        offset += n;
                    }
                }
                Op::SliceCols { a, start } => {
                    let cols = nodes[a.0].value.cols();
                    let w = node.value.cols();
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for (drow, grow) in d.chunks_mut(cols).zip(g.chunks(w)) {
                            axpy(&mut drow[*start..*start + w], grow, 1.0);
                        }
                    }
                }
                Op::GatherRows { a, idx } => {
                    let cols = node.value.cols();
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for (&i, grow) in idx.iter().zip(g.chunks(cols)) {
                            axpy(&mut d[i * cols..(i + 1) * cols], grow, 1.0);
                        }
                    }
                }
                Op::Softmax { a } => {
                    let cols = node.value.cols();
                    let y = node.value.data();
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for ((drow, grow), yrow) in d.chunks_mut(cols).zip(g.chunks(cols)).zip(y.chunks(cols)) {
                            let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            for k in 0..cols {
                                drow[k] += yrow[k] * (grow[k] - dot);
                            }
                        }
                    }
                }
                Op::Gelu { a } => {
                    let x = nodes[a.0].value.data();
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for ((d, g), &x) in d.iter_mut().zip(&g).zip(x) {
                            let u = GELU_C * (x + 0.044715 * x * x * x);
                            let t = u.tanh();
                            let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                            *d += g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
                        }
                    }
                }
                Op::Relu { a } => {
                    let x = nodes[a.0].value.data();
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for ((d, g), &x) in d.iter_mut().zip(&g).zip(x) {
                            if x > 0.0 {
                                *d += g;
                            }
                        }
                    }
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let cols = node.value.cols();
                    let gam = nodes[gamma.0].value.data();
                    if let Some(d) = slot(&mut grads, &nodes, *beta) {
                        for grow in g.chunks(cols) {
                            axpy(d, grow, 1.0);
                        }
                    }
                    if let Some(d) = slot(&mut grads, &nodes, *gamma) {
                        for (grow, hrow) in g.chunks(cols).zip(xhat.chunks(cols)) {
                            for k in 0..cols {
                                d[k] += grow[k] * hrow[k];
                            }
                        }
                    }
                    if let Some(d) = slot(&mut grads, &nodes, *x) {
                        let n = cols as f64;
                        for (r, ((drow, grow), hrow)) in d
                            .chunks_mut(cols)
                            .zip(g.chunks(cols))
                            .zip(xhat.chunks(cols))
                            .enumerate()
                        {
                            let mut s1 = 0.0;
                            let mut s2 = 0.0;
                            for k in 0..cols {
                                let dh = grow[k] * gam[k];
                                s1 += dh;
                                s2 += dh * hrow[k];
                            }
                            for k in 0..cols {
                                let dh = grow[k] * gam[k];
                                drow[k] += rstd[r] / n * (n * dh - s1 - hrow[k] * s2);
                            }
                        }
                    }
                }
                Op::Dropout { a, mask } => {
                    if let Some(d) = slot(&mut grads, &nodes, *a) {
                        for ((d, g), m) in d.iter_mut().zip(&g).zip(mask) {
                            *d += g * m;
                        }
                    }
                }
                Op::CrossEntropy { logits, targets, weights, probs, wsum } => {
                    let k = nodes[logits.0].value.cols();
                    if let Some(d) = slot(&mut grads, &nodes, *logits) {
                        for (r, (drow, prow)) in d.chunks_mut(k).zip(probs.chunks(k)).enumerate() {
                            let s = g[0] * weights[r] / wsum;
                            for c in 0..k {
                                drow[c] += s * prow[c];
                            }
                            drow[targets[r]] -= s;
                        }
                    }
                }
            }
        }
        out.entries.sort_by_key(|(id, _)| *id);
        if cfg!(debug_assertions) && out.entries.iter().any(|(_, g)| g.iter().any(|x| !x.is_finite())) {
            return Err(NumericsError::NonFinite { op: "backward" });
        }
        Ok(out)
    }
}

fn slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> Option<&'g mut Vec<f64>> {
    if !nodes[v.0].needs_grad {
        return None;
    }
    let n = nodes[v.0].value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn axpy(dst: &mut [f64], src: &[f64], s: f64) {
    for (d, x) in dst.iter_mut().zip(src) {
        *d += s * x;
    }
}

/// Replaces `row` by its softmax and returns its log-sum-exp.
fn softmax_in_place(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values.iter().map(|(n, t)| s.add(*n, t.clone()).unwrap()).collect();
        (s, ids)
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.constant(Tensor::zeros(&[1, 3]));
        let y = t.row_softmax(x).unwrap();
        for &p in t.value(y).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_matmul() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 4] = 1.0;
        }
        let a = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let i = t.constant(eye);
        let av = t.constant(a.clone());
        let y = t.matmul(i, av).unwrap();
        assert_eq!(t.value(y), &a);
    }

    #[test]
    fn cross_entropy_uniform_two_classes() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let z = t.constant(Tensor::zeros(&[1, 2]));
        let l = t.cross_entropy(z, &[0], None).unwrap();
        assert!((t.value(l).item() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn shape_errors_name_op_and_shapes() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        let err = t.matmul(a, b).unwrap_err();
        assert_eq!(err.to_string(), "matmul: incompatible shapes [2, 3] and [2, 3]");
    }

    #[test]
    fn sum_gradient_is_ones() {
        let w = Tensor::matrix(2, 2, vec![0.3, -1.0, 2.0, 0.1]).unwrap();
        let (s, ids) = store_with(&[("w", w)]);
        let mut t = Tape::new(&s);
        let wv = t.param(ids[0]);
        let l = t.sum(wv).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(ids[0]).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn square_gradient_is_twice_w() {
        let w = Tensor::matrix(2, 2, vec![0.3, -1.0, 2.0, 0.1]).unwrap();
        let (s, ids) = store_with(&[("w", w.clone())]);
        let mut t = Tape::new(&s);
        let wv = t.param(ids[0]);
        let sq = t.mul(wv, wv).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap();
        let expected: Vec<f64> = w.data().iter().map(|x| 2.0 * x).collect();
        assert_eq!(g.get(ids[0]).unwrap(), expected.as_slice());
    }

    #[test]
    fn backward_twice_fails() {
        let (s, ids) = store_with(&[("w", Tensor::scalar(1.0))]);
        let mut t = Tape::new(&s);
        let wv = t.param(ids[0]);
        let l = t.sum(wv).unwrap();
        t.backward(l).unwrap();
        assert!(matches!(t.backward(l), Err(NumericsError::GraphConsumed)));
    }

    #[test]
    fn backward_requires_scalar() {
        let (s, ids) = store_with(&[("w", Tensor::zeros(&[2, 2]))]);
        let mut t = Tape::new(&s);
        let wv = t.param(ids[0]);
        assert!(matches!(t.backward(wv), Err(NumericsError::NonScalarLoss(_))));
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.constant(Tensor::filled(&[2, 2], 1.0));
        assert_eq!(t.dropout(x, 0.5).unwrap(), x);
        let mut tt = Tape::training(&s, 1);
        let x = tt.constant(Tensor::filled(&[50, 50], 1.0));
        let y = tt.dropout(x, 0.5).unwrap();
        let kept = tt.value(y).data().iter().filter(|&&v| v > 0.0).count();
        assert!(kept > 1000 && kept < 1500);
        assert!(tt.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn non_finite_is_caught() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.constant(Tensor::scalar(f64::MAX));
        assert!(matches!(t.scale(x, 10.0), Err(NumericsError::NonFinite { .. })));
    }
}
