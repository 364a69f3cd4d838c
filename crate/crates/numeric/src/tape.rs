//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! Every operation appends a node holding its value and the indices of its
//! parents, so nodes are always stored in topological order. [`Tape::backward`]
//! walks the list once in reverse, accumulating adjoints.

use crate::{DenseMatrix, NumericError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    PRelu(Var, Var),
    Abs(Var),
    Square(Var),
    Exp(Var),
    Ln(Var),
    Softplus(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SelectRows(Var, Vec<usize>),
    Reshape(Var),
    PairwiseSqDist(Var, Var),
    /// Per-row window correlation; stores the centered data and norms.
    WindowCorr {
        input: Var,
        instruments: usize,
        steps: usize,
        centered: DenseMatrix,
        norms: DenseMatrix,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: DenseMatrix,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default, Clone)]
pub struct GradientTape {
    nodes: Vec<Node>,
}

/// Short alias used throughout the crate.
pub type Tape = GradientTape;

/// Adjoints indexed by node; `None` where no gradient flowed.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix> {
        self.adjoints.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of the given shape when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> DenseMatrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| DenseMatrix::zeros(shape.0, shape.1))
    }

    pub fn take(&mut self, v: Var) -> Option<DenseMatrix> {
        self.adjoints.get_mut(v.0).and_then(Option::take)
    }
}

type OpResult = Result<Var, NumericError>;

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&DenseMatrix, NumericError> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or(NumericError::IncompleteTape { node: v.0, len: self.nodes.len() })
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> OpResult {
        let value = self.check(a)?.matmul(self.check(b)?)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Adds a 1×c row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> OpResult {
        let (av, rv) = (self.check(a)?, self.check(row)?);
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(NumericError::ShapeMismatch {
                context: "Tape::add_row",
                left: av.shape(),
                right: rv.shape(),
            });
        }
        let mut value = av.clone();
        let bias = rv.as_slice();
        for r in 0..value.rows() {
            for (v, b) in value.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> OpResult {
        let value = self.check(a)?.zip_map(self.check(b)?, |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> OpResult {
        let value = self.check(a)?.zip_map(self.check(b)?, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> OpResult {
        let value = self.check(a)?.zip_map(self.check(b)?, |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> OpResult {
        let value = self.check(a)?.scale(k);
        Ok(self.push(value, Op::Scale(a, k)))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> OpResult {
        let value = self.check(a)?.map(|x| x + k);
        Ok(self.push(value, Op::AddScalar(a)))
    }

    /// Parametric ReLU with a trainable 1×1 slope node.
    pub fn prelu(&mut self, a: Var, slope: Var) -> OpResult {
        let s = self
            .check(slope)?
            .to_scalar()
            .ok_or(NumericError::NonScalar { shape: self.value(slope).shape() })?;
        let value = self.check(a)?.map(|x| if x > 0.0 { x } else { s * x });
        Ok(self.push(value, Op::PRelu(a, slope)))
    }

    pub fn abs(&mut self, a: Var) -> OpResult {
        let value = self.check(a)?.map(f64::abs);
        Ok(self.push(value, Op::Abs(a)))
    }

    pub fn square(&mut self, a: Var) -> OpResult {
        let value = self.check(a)?.map(|x| x * x);
        Ok(self.push(value, Op::Square(a)))
    }

    pub fn exp(&mut self, a: Var) -> OpResult {
        let value = self.check(a)?.map(f64::exp);
        Ok(self.push(value, Op::Exp(a)))
    }

    pub fn ln(&mut self, a: Var) -> OpResult {
        let value = self.check(a)?.map(f64::ln);
        Ok(self.push(value, Op::Ln(a)))
    }

    /// `ln(1 + eˣ)`, evaluated stably.
    pub fn softplus(&mut self, a: Var) -> OpResult {
        let value = self.check(a)?.map(softplus);
        Ok(self.push(value, Op::Softplus(a)))
    }

    pub fn sum(&mut self, a: Var) -> OpResult {
        let value = DenseMatrix::scalar(self.check(a)?.sum());
        Ok(self.push(value, Op::Sum(a)))
    }

    pub fn mean(&mut self, a: Var) -> OpResult {
        let av = self.check(a)?;
        if av.is_empty() {
            return Err(NumericError::Empty("Tape::mean"));
        }
        let value = DenseMatrix::scalar(av.sum() / av.len() as f64);
        Ok(self.push(value, Op::Mean(a)))
    }

    /// Horizontal concatenation of nodes with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> OpResult {
        let first = parts.first().ok_or(NumericError::Empty("Tape::concat_cols"))?;
        let rows = self.check(*first)?.rows();
        let mut cols = 0;
        for &p in parts {
            let pv = self.check(p)?;
            if pv.rows() != rows {
                return Err(NumericError::DimensionMismatch {
                    context: "Tape::concat_cols",
                    expected: rows,
                    found: pv.rows(),
                });
            }
            cols += pv.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row(r));
            }
        }
        let value = DenseMatrix::from_vec(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> OpResult {
        let av = self.check(a)?;
        if start + len > av.cols() {
            return Err(NumericError::DimensionMismatch {
                context: "Tape::slice_cols",
                expected: av.cols(),
                found: start + len,
            });
        }
        let value = DenseMatrix::from_fn(av.rows(), len, |r, c| av[(r, start + c)]);
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> OpResult {
        let av = self.check(a)?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= av.rows()) {
            return Err(NumericError::DimensionMismatch {
                context: "Tape::select_rows",
                expected: av.rows(),
                found: bad,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * av.cols());
        for &r in rows {
            data.extend_from_slice(av.row(r));
        }
        let value = DenseMatrix::from_vec(rows.len(), av.cols(), data)?;
        Ok(self.push(value, Op::SelectRows(a, rows.to_vec())))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> OpResult {
        let value = self.check(a)?.clone().reshape(rows, cols)?;
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Squared Euclidean distances between the rows of `a` and the rows of `b`.
    pub fn pairwise_sq_dist(&mut self, a: Var, b: Var) -> OpResult {
        let value = pairwise_sq_dist(self.check(a)?, self.check(b)?)?;
        Ok(self.push(value, Op::PairwiseSqDist(a, b)))
    }

    /// Each row of `a` is a time-major window (`steps` blocks of `instruments`
    /// values). Produces per-row lower-triangle Pearson correlations, ordered
    /// `(1,0), (2,0), (2,1), ...`.
    ///
    /// Rows containing a zero-variance instrument yield zeros; callers should
    /// drop them with [`window_corr_degenerate_rows`] before use.
    pub fn window_corr(&mut self, a: Var, instruments: usize, steps: usize) -> OpResult {
        let av = self.check(a)?;
        if av.cols() != instruments * steps {
            return Err(NumericError::DimensionMismatch {
                context: "Tape::window_corr",
                expected: instruments * steps,
                found: av.cols(),
            });
        }
        let pairs = instruments * instruments.saturating_sub(1) / 2;
        let rows = av.rows();
        let mut centered = DenseMatrix::zeros(rows, instruments * steps);
        let mut norms = DenseMatrix::zeros(rows, instruments);
        let mut value = DenseMatrix::zeros(rows, pairs);
        for r in 0..rows {
            let x = av.row(r);
            let xc = centered.row_mut(r);
            for i in 0..instruments {
                let mean = (0..steps).map(|t| x[t * instruments + i]).sum::<f64>() / steps as f64;
                for t in 0..steps {
                    xc[t * instruments + i] = x[t * instruments + i] - mean;
                }
            }
            let nr = norms.row_mut(r);
            for (i, n) in nr.iter_mut().enumerate() {
                *n = (0..steps)
                    .map(|t| xc[t * instruments + i] * xc[t * instruments + i])
                    .sum::<f64>()
                    .sqrt();
            }
            if nr.iter().any(|&n| !(n > 0.0)) {
                continue;
            }
            let out = value.row_mut(r);
            let mut p = 0;
            for i in 1..instruments {
                for j in 0..i {
                    let dot: f64 = (0..steps)
                        .map(|t| xc[t * instruments + i] * xc[t * instruments + j])
                        .sum();
                    out[p] = dot / (nr[i] * nr[j]);
                    p += 1;
                }
            }
        }
        Ok(self.push(
            value,
            Op::WindowCorr {
                input: a,
                instruments,
                steps,
                centered,
                norms,
            },
        ))
    }

    /// Rows of a [`Tape::window_corr`] node whose window had a zero-variance instrument.
    pub fn window_corr_degenerate_rows(&self, v: Var) -> Vec<usize> {
        match &self.nodes[v.0].op {
            Op::WindowCorr { norms, .. } => (0..norms.rows())
                .filter(|&r| norms.row(r).iter().any(|&n| !(n > 0.0)))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Back-propagates from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericError> {
        let lv = self.check(loss)?;
        if lv.shape() != (1, 1) {
            return Err(NumericError::NonScalar { shape: lv.shape() });
        }
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(DenseMatrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut adj)?;
            adj[idx] = Some(g);
        }
        adj.resize(self.nodes.len(), None);
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(
        &self,
        node: &Node,
        g: &DenseMatrix,
        adj: &mut [Option<DenseMatrix>],
    ) -> Result<(), NumericError> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(adj, *a, g.matmul_t(val(*b))?)?;
                accumulate(adj, *b, val(*a).t_matmul(g)?)?;
            }
            Op::AddRow(a, row) => {
                accumulate(adj, *a, g.clone())?;
                accumulate(adj, *row, DenseMatrix::row_vector(&g.column_sums()))?;
            }
            Op::Add(a, b) => {
                accumulate(adj, *a, g.clone())?;
                accumulate(adj, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, g.clone())?;
                accumulate(adj, *b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                accumulate(adj, *a, g.zip_map(val(*b), |x, y| x * y)?)?;
                accumulate(adj, *b, g.zip_map(val(*a), |x, y| x * y)?)?;
            }
            Op::Scale(a, k) => accumulate(adj, *a, g.scale(*k))?,
            Op::AddScalar(a) => accumulate(adj, *a, g.clone())?,
            Op::PRelu(a, slope) => {
                let s = val(*slope).as_slice()[0];
                let x = val(*a);
                accumulate(adj, *a, g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { s * gi })?)?;
                let ds: f64 = g
                    .as_slice()
                    .iter()
                    .zip(x.as_slice())
                    .map(|(gi, &xi)| if xi > 0.0 { 0.0 } else { gi * xi })
                    .sum();
                accumulate(adj, *slope, DenseMatrix::scalar(ds))?;
            }
            Op::Abs(a) => {
                let d = g.zip_map(val(*a), |gi, xi| {
                    if xi > 0.0 {
                        gi
                    } else if xi < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                })?;
                accumulate(adj, *a, d)?;
            }
            Op::Square(a) => accumulate(adj, *a, g.zip_map(val(*a), |gi, xi| 2.0 * xi * gi)?)?,
            Op::Exp(a) => accumulate(adj, *a, g.zip_map(&node.value, |gi, yi| gi * yi)?)?,
            Op::Ln(a) => accumulate(adj, *a, g.zip_map(val(*a), |gi, xi| gi / xi)?)?,
            Op::Softplus(a) => {
                accumulate(adj, *a, g.zip_map(val(*a), |gi, xi| gi * sigmoid(xi))?)?
            }
            Op::Sum(a) => {
                let av = val(*a);
                accumulate(adj, *a, DenseMatrix::filled(av.rows(), av.cols(), g.as_slice()[0]))?;
            }
            Op::Mean(a) => {
                let av = val(*a);
                let k = g.as_slice()[0] / av.len() as f64;
                accumulate(adj, *a, DenseMatrix::filled(av.rows(), av.cols(), k))?;
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = val(p).cols();
                    let part = DenseMatrix::from_fn(g.rows(), cols, |r, c| g[(r, offset + c)]);
                    accumulate(adj, p, part)?;
                    offset += cols;
                }
            }
            Op::SliceCols(a, start) => {
                let av = val(*a);
                let mut d = DenseMatrix::zeros(av.rows(), av.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(adj, *a, d)?;
            }
            Op::SelectRows(a, rows) => {
                let av = val(*a);
                let mut d = DenseMatrix::zeros(av.rows(), av.cols());
                for (k, &r) in rows.iter().enumerate() {
                    for (o, v) in d.row_mut(r).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                accumulate(adj, *a, d)?;
            }
            Op::Reshape(a) => {
                let av = val(*a);
                accumulate(adj, *a, g.clone().reshape(av.rows(), av.cols())?)?;
            }
            Op::PairwiseSqDist(a, b) => {
                // d_ij = |a_i|² + |b_j|² − 2 a_i·b_j
                let (av, bv) = (val(*a), val(*b));
                let row_sums: Vec<f64> = (0..g.rows()).map(|i| g.row(i).iter().sum()).collect();
                let col_sums = g.column_sums();
                let gb = g.matmul(bv)?;
                let ga = DenseMatrix::from_fn(av.rows(), av.cols(), |i, k| {
                    2.0 * (row_sums[i] * av[(i, k)] - gb[(i, k)])
                });
                let gta = g.t_matmul(av)?;
                let gbm = DenseMatrix::from_fn(bv.rows(), bv.cols(), |j, k| {
                    2.0 * (col_sums[j] * bv[(j, k)] - gta[(j, k)])
                });
                accumulate(adj, *a, ga)?;
                accumulate(adj, *b, gbm)?;
            }
            Op::WindowCorr {
                input,
                instruments,
                steps,
                centered,
                norms,
            } => {
                let n = *instruments;
                let corr = &node.value;
                let mut d = DenseMatrix::zeros(centered.rows(), centered.cols());
                for r in 0..centered.rows() {
                    let nr = norms.row(r);
                    if nr.iter().any(|&v| !(v > 0.0)) {
                        continue;
                    }
                    let xc = centered.row(r);
                    let dr = d.row_mut(r);
                    let mut p = 0;
                    for i in 1..n {
                        for j in 0..i {
                            let gij = g[(r, p)];
                            let cij = corr[(r, p)];
                            p += 1;
                            if gij == 0.0 {
                                continue;
                            }
                            let inv = 1.0 / (nr[i] * nr[j]);
                            let (ki, kj) = (cij / (nr[i] * nr[i]), cij / (nr[j] * nr[j]));
                            for t in 0..*steps {
                                let xi = xc[t * n + i];
                                let xj = xc[t * n + j];
                                dr[t * n + i] += gij * (xj * inv - ki * xi);
                                dr[t * n + j] += gij * (xi * inv - kj * xj);
                            }
                        }
                    }
                }
                accumulate(adj, *input, d)?;
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<DenseMatrix>], v: Var, g: DenseMatrix) -> Result<(), NumericError> {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Squared Euclidean distances between rows, `|a_i|² + |b_j|² − 2a_i·b_j`
/// clamped at zero.
pub fn pairwise_sq_dist(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericError> {
    let cross = a.matmul_t(b)?;
    let na: Vec<f64> = (0..a.rows()).map(|i| a.row(i).iter().map(|v| v * v).sum()).collect();
    let nb: Vec<f64> = (0..b.rows()).map(|j| b.row(j).iter().map(|v| v * v).sum()).collect();
    Ok(DenseMatrix::from_fn(a.rows(), b.rows(), |i, j| {
        (na[i] + nb[j] - 2.0 * cross[(i, j)]).max(0.0)
    }))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
