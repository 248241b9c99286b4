//! Reverse-mode differentiation over dense `f64` matrices. A [`Graph`] records
//! every operation of one forward pass; [`Graph::backward`] returns the
//! gradient of a scalar node with respect to each parameter that was read.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis};

use crate::boundary::{smooth_l1, smooth_l1_grad};
use crate::error::{Error, Result};
use crate::nets::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize, usize),
    GatherRows(Var, Vec<usize>),
    SegmentMax(Var, Vec<usize>),
    MaskedSoftmax(Var, Vec<bool>),
    PairDotLeft(Var, Var),
    PairDotRight(Var, Var),
    PairWeighted(Var, Var),
    Sum(Var),
    MaskedSqErr(Var, Array2<f64>, Vec<bool>),
    MaskedSmoothL1(Var, Array2<f64>, Vec<bool>),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Gradients keyed by parameter.
#[derive(Debug, Clone, Default)]
pub struct Grads {
    pub by_param: HashMap<ParamId, Array2<f64>>,
}

impl Grads {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.by_param.get(&id)
    }

    /// Adds `other` into `self`.
    pub fn accumulate(&mut self, other: Grads) {
        for (k, g) in other.by_param {
            match self.by_param.get_mut(&k) {
                Some(acc) => *acc += &g,
                None => {
                    self.by_param.insert(k, g);
                }
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.by_param.values_mut() {
            g.mapv_inplace(|v| v * c);
        }
    }
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn shape_err(op: &str, a: &Array2<f64>, b: &Array2<f64>) -> Error {
    Error::Shape(format!("{op}: {:?} vs {:?}", a.dim(), b.dim()))
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, a: Array2<f64>) -> Var {
        self.push(a, Op::Const)
    }

    /// Leaf for a stored parameter; repeated reads share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(self.store.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return Err(shape_err("matmul", x, y));
        }
        let v = x.dot(y);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.ncols() {
            return Err(shape_err("matmul_t", x, y));
        }
        let v = x.dot(&y.t());
        Ok(self.push(v, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(shape_err("add", x, y));
        }
        let v = x + y;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(row));
        if y.nrows() != 1 || x.ncols() != y.ncols() {
            return Err(shape_err("add_row", x, y));
        }
        let v = x + y;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(shape_err("mul", x, y));
        }
        let v = x * y;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { 0.0 });
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat_cols"));
        }
        let rows = self.value(parts[0]).nrows();
        let cols: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let x = self.value(p);
            if x.nrows() != rows {
                return Err(Error::Shape(format!("concat_cols: {} rows vs {rows}", x.nrows())));
            }
            v.slice_mut(s![.., at..at + x.ncols()]).assign(x);
            at += x.ncols();
        }
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        if start > end || end > x.ncols() {
            return Err(Error::Shape(format!("slice_cols {start}..{end} of {}", x.ncols())));
        }
        let v = x.slice(s![.., start..end]).to_owned();
        Ok(self.push(v, Op::SliceCols(a, start, end)))
    }

    /// Output row `i` is input row `idx[i]`; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.nrows()) {
            return Err(Error::Shape(format!("gather_rows index {bad} of {}", x.nrows())));
        }
        let v = x.select(Axis(0), idx);
        Ok(self.push(v, Op::GatherRows(a, idx.to_vec())))
    }

    /// Column-wise max over consecutive row segments of the given lengths.
    /// Ties resolve to the first row.
    pub fn segment_max(&mut self, a: Var, lengths: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if lengths.iter().sum::<usize>() != x.nrows() || lengths.contains(&0) {
            return Err(Error::Shape(format!("segment_max: segments {lengths:?} over {} rows", x.nrows())));
        }
        let c = x.ncols();
        let mut v = Array2::zeros((lengths.len(), c));
        let mut arg = vec![0usize; lengths.len() * c];
        let mut start = 0;
        for (sgm, &len) in lengths.iter().enumerate() {
            for j in 0..c {
                let mut best = start;
                for r in start + 1..start + len {
                    if x[[r, j]] > x[[best, j]] {
                        best = r;
                    }
                }
                v[[sgm, j]] = x[[best, j]];
                arg[sgm * c + j] = best;
            }
            start += len;
        }
        Ok(self.push(v, Op::SegmentMax(a, arg)))
    }

    /// Row softmax restricted to columns with `cols[j] == true`; other
    /// columns get exactly zero weight.
    pub fn masked_softmax(&mut self, a: Var, cols: &[bool]) -> Result<Var> {
        let x = self.value(a);
        if cols.len() != x.ncols() {
            return Err(Error::Shape(format!("masked_softmax: mask {} for {} cols", cols.len(), x.ncols())));
        }
        if !cols.iter().any(|&m| m) {
            return Err(Error::InvalidInput("every attention column is masked".into()));
        }
        let mut v = Array2::zeros(x.dim());
        for (i, row) in x.outer_iter().enumerate() {
            let mut mx = f64::NEG_INFINITY;
            for (j, &e) in row.iter().enumerate() {
                if cols[j] && e > mx {
                    mx = e;
                }
            }
            let mut z = 0.0;
            for (j, &e) in row.iter().enumerate() {
                if cols[j] {
                    let w = (e - mx).exp();
                    v[[i, j]] = w;
                    z += w;
                }
            }
            for j in 0..row.len() {
                if cols[j] {
                    v[[i, j]] /= z;
                }
            }
        }
        Ok(self.push(v, Op::MaskedSoftmax(a, cols.to_vec())))
    }

    fn pair_dims(&self, a: Var, p: Var, op: &str) -> Result<(usize, usize)> {
        let (x, y) = (self.value(a), self.value(p));
        let k = x.nrows();
        if y.nrows() != k * k || y.ncols() != x.ncols() {
            return Err(shape_err(op, x, y));
        }
        Ok((k, x.ncols()))
    }

    /// `out[i, j] = a[i] . p[i * K + j]`
    pub fn pair_dot_left(&mut self, a: Var, p: Var) -> Result<Var> {
        let (k, f) = self.pair_dims(a, p, "pair_dot_left")?;
        let (x, y) = (self.value(a), self.value(p));
        let mut v = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for c in 0..f {
                    acc += x[[i, c]] * y[[i * k + j, c]];
                }
                v[[i, j]] = acc;
            }
        }
        Ok(self.push(v, Op::PairDotLeft(a, p)))
    }

    /// `out[i, j] = p[i * K + j] . b[j]`
    pub fn pair_dot_right(&mut self, b: Var, p: Var) -> Result<Var> {
        let (k, f) = self.pair_dims(b, p, "pair_dot_right")?;
        let (x, y) = (self.value(b), self.value(p));
        let mut v = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for c in 0..f {
                    acc += y[[i * k + j, c]] * x[[j, c]];
                }
                v[[i, j]] = acc;
            }
        }
        Ok(self.push(v, Op::PairDotRight(b, p)))
    }

    /// `out[i] = sum_j w[i, j] p[i * K + j]` for a `K x K` weight matrix.
    pub fn pair_weighted(&mut self, w: Var, p: Var) -> Result<Var> {
        let (x, y) = (self.value(w), self.value(p));
        let k = x.nrows();
        if x.ncols() != k || y.nrows() != k * k {
            return Err(shape_err("pair_weighted", x, y));
        }
        let f = y.ncols();
        let mut v = Array2::zeros((k, f));
        for i in 0..k {
            for j in 0..k {
                let a = x[[i, j]];
                if a != 0.0 {
                    for c in 0..f {
                        v[[i, c]] += a * y[[i * k + j, c]];
                    }
                }
            }
        }
        Ok(self.push(v, Op::PairWeighted(w, p)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    fn check_target(&self, a: Var, target: &Array2<f64>, rows: &[bool], op: &str) -> Result<usize> {
        let x = self.value(a);
        if x.dim() != target.dim() || rows.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{op}: pred {:?}, target {:?}, mask {}",
                x.dim(),
                target.dim(),
                rows.len()
            )));
        }
        let n = rows.iter().filter(|&&m| m).count();
        if n == 0 {
            return Err(Error::Empty("loss mask"));
        }
        Ok(n)
    }

    /// Sum of squared errors over selected rows divided by their count.
    pub fn masked_sq_err(&mut self, a: Var, target: Array2<f64>, rows: &[bool]) -> Result<Var> {
        let n = self.check_target(a, &target, rows, "masked_sq_err")?;
        let x = self.value(a);
        let mut acc = 0.0;
        for (i, &m) in rows.iter().enumerate() {
            if m {
                for (p, t) in x.row(i).iter().zip(target.row(i)) {
                    acc += (p - t) * (p - t);
                }
            }
        }
        let v = Array2::from_elem((1, 1), acc / n as f64);
        Ok(self.push(v, Op::MaskedSqErr(a, target, rows.to_vec())))
    }

    /// Smooth-L1 summed per selected row, averaged over selected rows.
    pub fn masked_smooth_l1(&mut self, a: Var, target: Array2<f64>, rows: &[bool]) -> Result<Var> {
        let n = self.check_target(a, &target, rows, "masked_smooth_l1")?;
        let x = self.value(a);
        let mut acc = 0.0;
        for (i, &m) in rows.iter().enumerate() {
            if m {
                for (p, t) in x.row(i).iter().zip(target.row(i)) {
                    acc += smooth_l1(p - t);
                }
            }
        }
        let v = Array2::from_elem((1, 1), acc / n as f64);
        Ok(self.push(v, Op::MaskedSmoothL1(a, target, rows.to_vec())))
    }

    /// Gradients of the `1 x 1` node `loss` with respect to every parameter
    /// read in this graph.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::Shape(format!("backward from {:?}", self.value(loss).dim())));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let add = |grads: &mut Vec<Option<Array2<f64>>>, v: Var, g: Array2<f64>| match &mut grads[v.0] {
            Some(acc) => *acc += &g,
            slot => *slot = Some(g),
        };
        let mut out = Grads::default();
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => {
                    out.by_param.insert(*id, g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    add(&mut grads, *a, ga);
                    add(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    add(&mut grads, *a, ga);
                    add(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    add(&mut grads, *b, g.clone());
                    add(&mut grads, *a, g);
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    add(&mut grads, *r, gr);
                    add(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    add(&mut grads, *a, ga);
                    add(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => add(&mut grads, *a, g * *c),
                Op::Relu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    add(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(&node.value, |d, &y| *d *= 1.0 - y * y);
                    add(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        add(&mut grads, p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let x = self.value(*a);
                    let mut ga = Array2::zeros(x.dim());
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    add(&mut grads, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let x = self.value(*a);
                    let mut ga = Array2::zeros(x.dim());
                    for (r, &i) in idx.iter().enumerate() {
                        let mut row = ga.row_mut(i);
                        row += &g.row(r);
                    }
                    add(&mut grads, *a, ga);
                }
                Op::SegmentMax(a, arg) => {
                    let x = self.value(*a);
                    let c = x.ncols();
                    let mut ga = Array2::zeros(x.dim());
                    for (k, &r) in arg.iter().enumerate() {
                        ga[[r, k % c]] += g[[k / c, k % c]];
                    }
                    add(&mut grads, *a, ga);
                }
                Op::MaskedSoftmax(a, cols) => {
                    let y = &node.value;
                    let mut ga = Array2::zeros(y.dim());
                    for i in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|j| y[[i, j]] * g[[i, j]]).sum();
                        for j in 0..y.ncols() {
                            if cols[j] {
                                ga[[i, j]] = y[[i, j]] * (g[[i, j]] - dot);
                            }
                        }
                    }
                    add(&mut grads, *a, ga);
                }
                Op::PairDotLeft(a, p) => {
                    let (x, y) = (self.value(*a), self.value(*p));
                    let k = x.nrows();
                    let mut gx = Array2::zeros(x.dim());
                    let mut gy = Array2::zeros(y.dim());
                    for i in 0..k {
                        for j in 0..k {
                            let d = g[[i, j]];
                            for c in 0..x.ncols() {
                                gx[[i, c]] += d * y[[i * k + j, c]];
                                gy[[i * k + j, c]] += d * x[[i, c]];
                            }
                        }
                    }
                    add(&mut grads, *a, gx);
                    add(&mut grads, *p, gy);
                }
                Op::PairDotRight(b, p) => {
                    let (x, y) = (self.value(*b), self.value(*p));
                    let k = x.nrows();
                    let mut gx = Array2::zeros(x.dim());
                    let mut gy = Array2::zeros(y.dim());
                    for i in 0..k {
                        for j in 0..k {
                            let d = g[[i, j]];
                            for c in 0..x.ncols() {
                                gx[[j, c]] += d * y[[i * k + j, c]];
                                gy[[i * k + j, c]] += d * x[[j, c]];
                            }
                        }
                    }
                    add(&mut grads, *b, gx);
                    add(&mut grads, *p, gy);
                }
                Op::PairWeighted(w, p) => {
                    let (x, y) = (self.value(*w), self.value(*p));
                    let k = x.nrows();
                    let mut gw = Array2::zeros(x.dim());
                    let mut gp = Array2::zeros(y.dim());
                    for i in 0..k {
                        for j in 0..k {
                            let mut acc = 0.0;
                            for c in 0..y.ncols() {
                                acc += g[[i, c]] * y[[i * k + j, c]];
                                gp[[i * k + j, c]] = x[[i, j]] * g[[i, c]];
                            }
                            gw[[i, j]] = acc;
                        }
                    }
                    add(&mut grads, *w, gw);
                    add(&mut grads, *p, gp);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    add(&mut grads, *a, ga);
                }
                Op::MaskedSqErr(a, target, rows) => {
                    let x = self.value(*a);
                    let n = rows.iter().filter(|&&m| m).count() as f64;
                    let k = 2.0 * g[[0, 0]] / n;
                    let mut ga = Array2::zeros(x.dim());
                    for (i, &m) in rows.iter().enumerate() {
                        if m {
                            for c in 0..x.ncols() {
                                ga[[i, c]] = k * (x[[i, c]] - target[[i, c]]);
                            }
                        }
                    }
                    add(&mut grads, *a, ga);
                }
                Op::MaskedSmoothL1(a, target, rows) => {
                    let x = self.value(*a);
                    let n = rows.iter().filter(|&&m| m).count() as f64;
                    let k = g[[0, 0]] / n;
                    let mut ga = Array2::zeros(x.dim());
                    for (i, &m) in rows.iter().enumerate() {
                        if m {
                            for c in 0..x.ncols() {
                                ga[[i, c]] = k * smooth_l1_grad(x[[i, c]] - target[[i, c]]);
                            }
                        }
                    }
                    add(&mut grads, *a, ga);
                }
            }
        }
        Ok(out)
    }
}
