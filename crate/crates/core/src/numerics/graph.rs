//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is an append-only arena of [`DiffNode`]s. Building an
//! expression records the operator and parent indices; [`Tape::backward`]
//! walks the arena in reverse creation order and accumulates exact
//! derivatives into each node's `grad`. The operator set is closed: matmul,
//! transpose, elementwise arithmetic and activations, row reductions,
//! squared distances (rowwise and all distinct pairs), concatenation, and
//! full reductions. Everything else in the library is composed from these.
//!
//! Graphs are not shared across threads; one computation owns one tape.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Index of a node on its tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Recorded operator. Fields are parent node indices plus any constants.
/// Some payloads are only consulted at forward time but are kept on the
/// record so a dumped tape is self-describing.
#[derive(Debug, Clone)]
#[allow(dead_code)]
enum Op {
    Leaf,
    /// Leaf that never receives gradient (inputs, data constants).
    Constant,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// Broadcast add of a 1 x d row vector to every row of an M x d matrix.
    AddRowVec(usize, usize),
    /// Multiply row i of an M x d matrix by entry i of an M x 1 column.
    ScaleRows(usize, usize),
    Scale(usize, f64),
    AddConst(usize, f64),
    Tanh(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    /// Numerically stable log(sigmoid(x)).
    LogSigmoid(usize),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
    Recip(usize),
    /// max(x, k); gradient passes only where x > k.
    ClampMin(usize, f64),
    /// Indicator 1[x > 0]; derivative is zero almost everywhere.
    Step(usize),
    Sin(usize),
    Cos(usize),
    /// Row means: M x d -> M x 1.
    RowMean(usize),
    /// Row population variances: M x d -> M x 1.
    RowVar(usize),
    /// Row sums of squares: M x d -> M x 1.
    RowSumSq(usize),
    /// Squared distances of corresponding rows: (M x d, M x d) -> M x 1.
    RowwiseSqDist(usize, usize),
    /// Squared distances of all distinct row pairs, (i, j) with i < j in
    /// lexicographic order: M x d -> M(M-1)/2 x 1.
    PairSqDist(usize),
    /// Horizontal concatenation: (M x p, M x q) -> M x (p+q).
    HConcat(usize, usize),
    Sum(usize),
    Mean(usize),
}

/// Value-and-gradient record in the computation graph.
#[derive(Debug)]
pub struct DiffNode {
    value: Matrix,
    grad: Matrix,
    op: Op,
}

impl DiffNode {
    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn grad(&self) -> &Matrix {
        &self.grad
    }
}

/// Append-only computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<DiffNode>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].grad
    }

    pub fn node(&self, id: NodeId) -> &DiffNode {
        &self.nodes[id.0]
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(DiffNode { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Differentiable input (parameter).
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Non-differentiable input (data, fixed constants).
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn scalar_constant(&mut self, v: f64) -> NodeId {
        self.constant(Matrix::scalar(v))
    }

    // ---- binary ops ----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a.0, b.0)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a.0))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("mul", va.shape_str(), vb.shape_str()));
        }
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(x, y)| x * y)
            .collect::<Vec<_>>();
        let v = Matrix::from_vec(va.rows(), va.cols(), data)?;
        Ok(self.push(v, Op::Mul(a.0, b.0)))
    }

    pub fn add_row_vec(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(Error::shape("add_row_vec", va.shape_str(), vr.shape_str()));
        }
        let mut v = va.clone();
        for r in 0..v.rows() {
            for (o, &b) in v.row_mut(r).iter_mut().zip(vr.as_slice()) {
                *o += b;
            }
        }
        Ok(self.push(v, Op::AddRowVec(a.0, row.0)))
    }

    pub fn scale_rows(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        let (va, vc) = (self.value(a), self.value(col));
        if vc.cols() != 1 || vc.rows() != va.rows() {
            return Err(Error::shape("scale_rows", va.shape_str(), vc.shape_str()));
        }
        let mut v = va.clone();
        for r in 0..v.rows() {
            let s = vc.get(r, 0);
            for o in v.row_mut(r) {
                *o *= s;
            }
        }
        Ok(self.push(v, Op::ScaleRows(a.0, col.0)))
    }

    // ---- scalar-parameterized ops ----

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a).scale(k);
        self.push(v, Op::Scale(a.0, k))
    }

    pub fn add_const(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a).map(|x| x + k);
        self.push(v, Op::AddConst(a.0, k))
    }

    pub fn clamp_min(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a).map(|x| x.max(k));
        self.push(v, Op::ClampMin(a.0, k))
    }

    // ---- elementwise ops ----

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }

    pub fn leaky_relu(&mut self, a: NodeId, alpha: f64) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { alpha * x });
        self.push(v, Op::LeakyRelu(a.0, alpha))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a.0))
    }

    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self
            .value(a)
            .map(|x| x.min(0.0) - (-x.abs()).exp().ln_1p());
        self.push(v, Op::LogSigmoid(a.0))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a.0))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).as_slice().iter().any(|&x| x <= 0.0) {
            return Err(Error::domain("log", "input must be strictly positive"));
        }
        let v = self.value(a).map(f64::ln);
        Ok(self.push(v, Op::Log(a.0)))
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).as_slice().iter().any(|&x| x < 0.0) {
            return Err(Error::domain("sqrt", "input must be nonnegative"));
        }
        let v = self.value(a).map(f64::sqrt);
        Ok(self.push(v, Op::Sqrt(a.0)))
    }

    pub fn recip(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).as_slice().iter().any(|&x| x == 0.0) {
            return Err(Error::domain("recip", "input must be nonzero"));
        }
        let v = self.value(a).map(f64::recip);
        Ok(self.push(v, Op::Recip(a.0)))
    }

    pub fn step(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
        self.push(v, Op::Step(a.0))
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::sin);
        self.push(v, Op::Sin(a.0))
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::cos);
        self.push(v, Op::Cos(a.0))
    }

    // ---- row reductions ----

    pub fn row_mean(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.cols() == 0 {
            return Err(Error::domain("row_mean", "matrix has no columns"));
        }
        let d = va.cols() as f64;
        let mut v = Matrix::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            v.set(r, 0, va.row(r).iter().sum::<f64>() / d);
        }
        Ok(self.push(v, Op::RowMean(a.0)))
    }

    /// Population variance (divide by d) of each row.
    pub fn row_var(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.cols() < 2 {
            return Err(Error::domain(
                "row_var",
                format!("variance needs at least 2 columns, got {}", va.cols()),
            ));
        }
        let d = va.cols() as f64;
        let mut v = Matrix::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            let row = va.row(r);
            let mu = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d;
            v.set(r, 0, var);
        }
        Ok(self.push(v, Op::RowVar(a.0)))
    }

    pub fn row_sum_sq(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let mut v = Matrix::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            v.set(r, 0, va.row(r).iter().map(|x| x * x).sum::<f64>());
        }
        self.push(v, Op::RowSumSq(a.0))
    }

    pub fn rowwise_sqdist(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("rowwise_sqdist", va.shape_str(), vb.shape_str()));
        }
        let mut v = Matrix::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            v.set(r, 0, Matrix::row_sqdist(va, r, vb, r));
        }
        Ok(self.push(v, Op::RowwiseSqDist(a.0, b.0)))
    }

    pub fn pair_sqdist(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let m = va.rows();
        if m < 2 {
            return Err(Error::domain(
                "pair_sqdist",
                format!("need at least 2 rows, got {m}"),
            ));
        }
        let mut data = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                data.push(Matrix::row_sqdist(va, i, va, j));
            }
        }
        let v = Matrix::from_vec(m * (m - 1) / 2, 1, data)?;
        Ok(self.push(v, Op::PairSqDist(a.0)))
    }

    pub fn hconcat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(Error::shape("hconcat", va.shape_str(), vb.shape_str()));
        }
        let mut v = Matrix::zeros(va.rows(), va.cols() + vb.cols());
        for r in 0..va.rows() {
            let row = v.row_mut(r);
            row[..va.cols()].copy_from_slice(va.row(r));
            row[va.cols()..].copy_from_slice(vb.row(r));
        }
        Ok(self.push(v, Op::HConcat(a.0, b.0)))
    }

    // ---- full reductions ----

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).as_slice().iter().sum::<f64>();
        self.push(Matrix::scalar(s), Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.len() == 0 {
            return Err(Error::domain("mean", "empty matrix"));
        }
        let s = va.as_slice().iter().sum::<f64>() / va.len() as f64;
        Ok(self.push(Matrix::scalar(s), Op::Mean(a.0)))
    }

    // ---- gradients ----

    /// Reset every gradient on the tape to zero.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            for g in node.grad.as_mut_slice() {
                *g = 0.0;
            }
        }
    }

    /// Accumulate d(root)/d(node) into every node's `grad`. The root must
    /// be a 1x1 scalar. Adjoints propagate through a scratch buffer so
    /// repeated calls without [`Tape::zero_grad`] add up exactly.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                "1x1 scalar root",
                self.value(root).shape_str(),
            ));
        }
        let mut adj: Vec<Matrix> = self
            .nodes
            .iter()
            .take(root.0 + 1)
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        adj[root.0].as_mut_slice()[0] = 1.0;

        for i in (0..=root.0).rev() {
            let (below, at) = adj.split_at_mut(i);
            let g = &at[0];
            if g.as_slice().iter().all(|&v| v == 0.0) {
                continue;
            }
            let nodes = &self.nodes;
            let acc = |buf: &mut [Matrix], target: usize, delta: &Matrix| {
                if matches!(nodes[target].op, Op::Constant) {
                    return;
                }
                for (o, &d) in buf[target].as_mut_slice().iter_mut().zip(delta.as_slice()) {
                    *o += d;
                }
            };
            match nodes[i].op {
                Op::Leaf | Op::Constant | Op::Step(_) => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&nodes[b].value.transpose())?;
                    let db = nodes[a].value.transpose().matmul(g)?;
                    acc(below, a, &da);
                    acc(below, b, &db);
                }
                Op::Transpose(a) => {
                    acc(below, a, &g.transpose());
                }
                Op::Add(a, b) => {
                    let g = g.clone();
                    acc(below, a, &g);
                    acc(below, b, &g);
                }
                Op::Sub(a, b) => {
                    acc(below, a, &g.clone());
                    acc(below, b, &g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let da = hadamard(g, &nodes[b].value);
                    let db = hadamard(g, &nodes[a].value);
                    acc(below, a, &da);
                    acc(below, b, &db);
                }
                Op::AddRowVec(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in gr.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(below, a, &g.clone());
                    acc(below, row, &gr);
                }
                Op::ScaleRows(a, col) => {
                    let va = &nodes[a].value;
                    let vc = &nodes[col].value;
                    let mut da = g.clone();
                    for r in 0..da.rows() {
                        let s = vc.get(r, 0);
                        for o in da.row_mut(r) {
                            *o *= s;
                        }
                    }
                    let mut dc = Matrix::zeros(vc.rows(), 1);
                    for r in 0..g.rows() {
                        let dot: f64 = g.row(r).iter().zip(va.row(r)).map(|(x, y)| x * y).sum();
                        dc.set(r, 0, dot);
                    }
                    acc(below, a, &da);
                    acc(below, col, &dc);
                }
                Op::Scale(a, k) => {
                    acc(below, a, &g.scale(k));
                }
                Op::AddConst(a, _) => {
                    acc(below, a, &g.clone());
                }
                Op::ClampMin(a, k) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| if x > k { gv } else { 0.0 });
                    acc(below, a, &da);
                }
                Op::Tanh(a) => {
                    let da = zip_map(g, &nodes[i].value, |gv, t| gv * (1.0 - t * t));
                    acc(below, a, &da);
                }
                Op::Relu(a) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| if x > 0.0 { gv } else { 0.0 });
                    acc(below, a, &da);
                }
                Op::LeakyRelu(a, alpha) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| {
                        if x > 0.0 {
                            gv
                        } else {
                            alpha * gv
                        }
                    });
                    acc(below, a, &da);
                }
                Op::Sigmoid(a) => {
                    let da = zip_map(g, &nodes[i].value, |gv, s| gv * s * (1.0 - s));
                    acc(below, a, &da);
                }
                Op::LogSigmoid(a) => {
                    // d/dx log sigmoid(x) = sigmoid(-x) = 1 / (1 + e^x)
                    let da = zip_map(g, &nodes[a].value, |gv, x| gv / (1.0 + x.exp()));
                    acc(below, a, &da);
                }
                Op::Exp(a) => {
                    let da = hadamard(g, &nodes[i].value);
                    acc(below, a, &da);
                }
                Op::Log(a) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| gv / x);
                    acc(below, a, &da);
                }
                Op::Sqrt(a) => {
                    let da = zip_map(g, &nodes[i].value, |gv, s| gv / (2.0 * s));
                    acc(below, a, &da);
                }
                Op::Recip(a) => {
                    let da = zip_map(g, &nodes[i].value, |gv, r| -gv * r * r);
                    acc(below, a, &da);
                }
                Op::Sin(a) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| gv * x.cos());
                    acc(below, a, &da);
                }
                Op::Cos(a) => {
                    let da = zip_map(g, &nodes[a].value, |gv, x| -gv * x.sin());
                    acc(below, a, &da);
                }
                Op::RowMean(a) => {
                    let shape = nodes[a].value.shape();
                    let d = shape.1 as f64;
                    let mut da = Matrix::zeros(shape.0, shape.1);
                    for r in 0..shape.0 {
                        let gv = g.get(r, 0) / d;
                        for o in da.row_mut(r) {
                            *o = gv;
                        }
                    }
                    acc(below, a, &da);
                }
                Op::RowVar(a) => {
                    // d var / d x_j = 2 (x_j - mu) / d
                    let va = &nodes[a].value;
                    let d = va.cols() as f64;
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    for r in 0..va.rows() {
                        let row = va.row(r);
                        let mu = row.iter().sum::<f64>() / d;
                        let gv = g.get(r, 0);
                        for (o, &x) in da.row_mut(r).iter_mut().zip(row) {
                            *o = gv * 2.0 * (x - mu) / d;
                        }
                    }
                    acc(below, a, &da);
                }
                Op::RowSumSq(a) => {
                    let va = &nodes[a].value;
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    for r in 0..va.rows() {
                        let gv = g.get(r, 0);
                        for (o, &x) in da.row_mut(r).iter_mut().zip(va.row(r)) {
                            *o = gv * 2.0 * x;
                        }
                    }
                    acc(below, a, &da);
                }
                Op::RowwiseSqDist(a, b) => {
                    let va = &nodes[a].value;
                    let vb = &nodes[b].value;
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    let mut db = Matrix::zeros(vb.rows(), vb.cols());
                    for r in 0..va.rows() {
                        let gv = g.get(r, 0);
                        for c in 0..va.cols() {
                            let diff = 2.0 * gv * (va.get(r, c) - vb.get(r, c));
                            da.set(r, c, diff);
                            db.set(r, c, -diff);
                        }
                    }
                    acc(below, a, &da);
                    acc(below, b, &db);
                }
                Op::PairSqDist(a) => {
                    let va = &nodes[a].value;
                    let m = va.rows();
                    let mut da = Matrix::zeros(m, va.cols());
                    let mut p = 0;
                    for r in 0..m {
                        for s in (r + 1)..m {
                            let gv = g.get(p, 0);
                            for c in 0..va.cols() {
                                let diff = 2.0 * gv * (va.get(r, c) - va.get(s, c));
                                da.set(r, c, da.get(r, c) + diff);
                                da.set(s, c, da.get(s, c) - diff);
                            }
                            p += 1;
                        }
                    }
                    acc(below, a, &da);
                }
                Op::HConcat(a, b) => {
                    let pa = nodes[a].value.cols();
                    let mut da = Matrix::zeros(g.rows(), pa);
                    let mut db = Matrix::zeros(g.rows(), g.cols() - pa);
                    for r in 0..g.rows() {
                        da.row_mut(r).copy_from_slice(&g.row(r)[..pa]);
                        db.row_mut(r).copy_from_slice(&g.row(r)[pa..]);
                    }
                    acc(below, a, &da);
                    acc(below, b, &db);
                }
                Op::Sum(a) => {
                    let gv = g.get(0, 0);
                    let shape = nodes[a].value.shape();
                    acc(below, a, &Matrix::filled(shape.0, shape.1, gv));
                }
                Op::Mean(a) => {
                    let gv = g.get(0, 0);
                    let shape = nodes[a].value.shape();
                    acc(
                        below,
                        a,
                        &Matrix::filled(shape.0, shape.1, gv / (shape.0 * shape.1) as f64),
                    );
                }
            }
        }

        for (node, a) in self.nodes.iter_mut().zip(adj.iter()) {
            if matches!(node.op, Op::Constant) {
                continue;
            }
            for (dst, &d) in node.grad.as_mut_slice().iter_mut().zip(a.as_slice()) {
                *dst += d;
            }
        }
        Ok(())
    }

    // ---- composites used throughout the library ----

    /// Rows divided by their Euclidean norms, inside the graph. Squared
    /// norms are clamped at `floor^2` so zero rows cannot produce infinite
    /// gradients.
    pub fn l2_normalize_rows(&mut self, a: NodeId, floor: f64) -> Result<NodeId> {
        let ss = self.row_sum_sq(a);
        let clamped = self.clamp_min(ss, floor * floor);
        let norm = self.sqrt(clamped)?;
        let inv = self.recip(norm)?;
        self.scale_rows(a, inv)
    }
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.cols());
    for ((o, &x), &y) in out
        .as_mut_slice()
        .iter_mut()
        .zip(a.as_slice())
        .zip(b.as_slice())
    {
        *o = x * y;
    }
    out
}

fn zip_map(g: &Matrix, x: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let mut out = Matrix::zeros(g.rows(), g.cols());
    for ((o, &gv), &xv) in out
        .as_mut_slice()
        .iter_mut()
        .zip(g.as_slice())
        .zip(x.as_slice())
    {
        *o = f(gv, xv);
    }
    out
}
