use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::SparseRows;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A constant sparse matrix together with its transpose (needed by the
/// backward pass).
#[derive(Debug)]
pub struct SparseConst {
    fwd: SparseRows,
    bwd: SparseRows,
}

impl SparseConst {
    pub fn new(m: SparseRows) -> Arc<SparseConst> {
        let bwd = m.transpose();
        Arc::new(SparseConst { fwd: m, bwd })
    }

    pub fn matrix(&self) -> &SparseRows {
        &self.fwd
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseConst>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    ScaleByVar(Var, Var),
    Relu(Var),
    Square(Var),
    Abs(Var),
    Sqrt(Var),
    RowLogSoftmax { x: Var, mask_diagonal: bool },
    SegmentSum { x: Var, segments: Arc<Vec<usize>>, count: usize },
    Gather { x: Var, at: Arc<Vec<(usize, usize)>> },
    SelectRows { x: Var, rows: Arc<Vec<usize>> },
    Sum(Var),
    MeanCols(Var),
    VarCols(Var),
    NormalizeRows(Var),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
        running: Option<Arc<(Vec<f64>, Vec<f64>)>>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Transpose(Var),
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | AddRow(a, b) | Sub(a, b) | Mul(a, b) | ScaleByVar(a, b) => {
                vec![*a, *b]
            }
            SparseMatMul(_, x)
            | Scale(x, _)
            | AddScalar(x, _)
            | Relu(x)
            | Square(x)
            | Abs(x)
            | Sqrt(x)
            | Sum(x)
            | MeanCols(x)
            | VarCols(x)
            | NormalizeRows(x)
            | Transpose(x) => vec![*x],
            RowLogSoftmax { x, .. }
            | SegmentSum { x, .. }
            | Gather { x, .. }
            | SelectRows { x, .. } => vec![*x],
            BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            ConcatCols(vs) | ConcatRows(vs) => vs.clone(),
        }
    }

    fn has_kink(&self) -> Option<Var> {
        match self {
            Op::Relu(x) | Op::Abs(x) => Some(*x),
            _ => None,
        }
    }
}

/// Forward-pass byproducts kept for the backward pass.
#[derive(Clone, Debug)]
enum Aux {
    None,
    /// Normalized input and per-column `1/sqrt(var + eps)`; for training-mode
    /// batch norm also the batch mean and unbiased batch variance.
    BatchNorm {
        xhat: Tensor,
        inv_std: Vec<f64>,
        batch_stats: Option<(Vec<f64>, Vec<f64>)>,
    },
    /// Row norms of the input.
    Norms(Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    aux: Aux,
}

/// A recorded computation: values are computed eagerly as operations are
/// appended, can be recomputed from new leaf values with [`Tape::replay`],
/// and differentiated in reverse with [`Tape::backward`].
///
/// Reductions always sum in increasing index order, so identical inputs give
/// bit-identical results.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            aux: Aux::None,
        });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownVar(v.0))
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Overwrites a leaf value; call [`Tape::replay`] afterwards.
    pub fn set_value(&mut self, v: Var, value: Tensor) -> Result<()> {
        self.check(v)?;
        let node = &mut self.nodes[v.0];
        if !matches!(node.op, Op::Leaf) {
            return Err(shape_err("set_value", format!("variable {} is not a leaf", v.0)));
        }
        if node.value.shape() != value.shape() {
            return Err(shape_err(
                "set_value",
                format!("{:?} vs {:?}", node.value.shape(), value.shape()),
            ));
        }
        node.value = value;
        Ok(())
    }

    /// Batch mean and unbiased variance seen by a training-mode batch norm.
    pub fn batch_norm_stats(&self, v: Var) -> Option<&(Vec<f64>, Vec<f64>)> {
        match &self.nodes.get(v.0)?.aux {
            Aux::BatchNorm { batch_stats, .. } => batch_stats.as_ref(),
            _ => None,
        }
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        for p in op.parents() {
            self.check(p)?;
        }
        let (value, aux) = self.compute(&op)?;
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            aux,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Recomputes every non-leaf value from the current leaf values.
    pub fn replay(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let (value, aux) = self.compute(&op)?;
            self.nodes[i].value = value;
            self.nodes[i].aux = aux;
        }
        Ok(())
    }

    /// Sets the named leaves and replays; returns the requested outputs.
    pub fn evaluate(&mut self, inputs: &[(Var, Tensor)], outputs: &[Var]) -> Result<Vec<Tensor>> {
        for (v, t) in inputs {
            self.set_value(*v, t.clone())?;
        }
        self.replay()?;
        outputs
            .iter()
            .map(|&o| {
                self.check(o)?;
                Ok(self.value(o).clone())
            })
            .collect()
    }

    /// Sign pattern of every relu/abs input, with entries within `tol` of
    /// zero marked 0. Used to exclude kinks in gradient checks.
    pub(crate) fn kink_signature(&self, tol: f64) -> Vec<i8> {
        let mut sig = Vec::new();
        for n in &self.nodes {
            if let Some(x) = n.op.has_kink() {
                for &v in self.nodes[x.0].value.data() {
                    if v.abs() <= tol {
                        sig.push(0);
                    } else {
                        sig.push(if v > 0.0 { 1 } else { -1 });
                    }
                }
            }
        }
        sig
    }

    // ---- operations -------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul(a, b))
    }

    /// Constant sparse matrix times `x`.
    pub fn sparse_matmul(&mut self, s: Arc<SparseConst>, x: Var) -> Result<Var> {
        self.push(Op::SparseMatMul(s, x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    /// Adds a `1×n` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.push(Op::AddRow(x, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.push(Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.push(Op::AddScalar(x, c))
    }

    /// `x` times a `1×1` variable.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        self.push(Op::ScaleByVar(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Relu(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Square(x))
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Abs(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Sqrt(x))
    }

    /// Row-wise log-softmax. With `mask_diagonal`, entry `(i, i)` is left out
    /// of row `i`'s normalizer and its output is zero.
    pub fn row_log_softmax(&mut self, x: Var, mask_diagonal: bool) -> Result<Var> {
        self.push(Op::RowLogSoftmax { x, mask_diagonal })
    }

    /// Sums rows of `x` into `count` segments; row `i` goes to `segments[i]`.
    pub fn segment_sum(&mut self, x: Var, segments: Arc<Vec<usize>>, count: usize) -> Result<Var> {
        self.push(Op::SegmentSum { x, segments, count })
    }

    /// Picks entries `(row, col)` into a `1×k` row.
    pub fn gather(&mut self, x: Var, at: Arc<Vec<(usize, usize)>>) -> Result<Var> {
        self.push(Op::Gather { x, at })
    }

    pub fn select_rows(&mut self, x: Var, rows: Arc<Vec<usize>>) -> Result<Var> {
        self.push(Op::SelectRows { x, rows })
    }

    /// Sum of all entries, `1×1`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Sum(x))
    }

    /// Column means, `1×n`.
    pub fn mean_cols(&mut self, x: Var) -> Result<Var> {
        self.push(Op::MeanCols(x))
    }

    /// Unbiased column variances, `1×n`; zero when there are fewer than two rows.
    pub fn var_cols(&mut self, x: Var) -> Result<Var> {
        self.push(Op::VarCols(x))
    }

    /// Scales each row to unit Euclidean norm; zero rows are an error.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        self.push(Op::NormalizeRows(x))
    }

    /// Batch normalization over rows. With `running = Some((mean, var))` the
    /// given statistics are used (evaluation mode); otherwise batch statistics.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
        running: Option<Arc<(Vec<f64>, Vec<f64>)>>,
    ) -> Result<Var> {
        self.push(Op::BatchNorm {
            x,
            gamma,
            beta,
            eps,
            running,
        })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.push(Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.push(Op::ConcatRows(parts.to_vec()))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Transpose(x))
    }

    /// Pairwise cosine similarities between the rows of `x`.
    pub fn cosine_similarity_matrix(&mut self, x: Var) -> Result<Var> {
        let n = self.normalize_rows(x)?;
        let t = self.transpose(n)?;
        self.matmul(n, t)
    }

    // ---- forward ----------------------------------------------------------

    fn compute(&self, op: &Op) -> Result<(Tensor, Aux)> {
        let val = |v: &Var| &self.nodes[v.0].value;
        let same = |name: &'static str, a: &Tensor, b: &Tensor| -> Result<()> {
            if a.shape() == b.shape() {
                Ok(())
            } else {
                Err(shape_err(name, format!("{:?} vs {:?}", a.shape(), b.shape())))
            }
        };
        let zip = |a: &Tensor, b: &Tensor, f: fn(f64, f64) -> f64| {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(a.rows(), a.cols(), data).expect("same shape")
        };
        let out = match op {
            Op::Leaf => unreachable!("leaves are never recomputed"),
            Op::MatMul(a, b) => val(a).matmul(val(b))?,
            Op::SparseMatMul(s, x) => {
                let x = val(x);
                let m = &s.fwd;
                if m.n_cols != x.rows() {
                    return Err(shape_err(
                        "sparse_matmul",
                        format!("[{}, {}] x {:?}", m.n_rows, m.n_cols, x.shape()),
                    ));
                }
                spmm(m, x)
            }
            Op::Add(a, b) => {
                same("add", val(a), val(b))?;
                zip(val(a), val(b), |x, y| x + y)
            }
            Op::Sub(a, b) => {
                same("sub", val(a), val(b))?;
                zip(val(a), val(b), |x, y| x - y)
            }
            Op::Mul(a, b) => {
                same("mul", val(a), val(b))?;
                zip(val(a), val(b), |x, y| x * y)
            }
            Op::AddRow(x, r) => {
                let (x, r) = (val(x), val(r));
                if r.shape() != [1, x.cols()] {
                    return Err(shape_err("add_row", format!("{:?} + {:?}", x.shape(), r.shape())));
                }
                let mut out = x.clone();
                for i in 0..x.rows() {
                    for (o, b) in out.row_mut(i).iter_mut().zip(r.data()) {
                        *o += b;
                    }
                }
                out
            }
            Op::Scale(x, c) => {
                let c = *c;
                val(x).map(|v| v * c)
            }
            Op::AddScalar(x, c) => {
                let c = *c;
                val(x).map(|v| v + c)
            }
            Op::ScaleByVar(x, s) => {
                let s = val(s);
                if s.shape() != [1, 1] {
                    return Err(shape_err("scale_by", format!("scalar has shape {:?}", s.shape())));
                }
                let c = s.item();
                val(x).map(|v| v * c)
            }
            Op::Relu(x) => val(x).map(|v| v.max(0.0)),
            Op::Square(x) => val(x).map(|v| v * v),
            Op::Abs(x) => val(x).map(f64::abs),
            Op::Sqrt(x) => val(x).map(f64::sqrt),
            Op::RowLogSoftmax { x, mask_diagonal } => {
                let x = val(x);
                let mut out = Tensor::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let row = x.row(i);
                    let keep = |j: usize| !(*mask_diagonal && i == j);
                    let mx = row
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| keep(j))
                        .map(|(_, &v)| v)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if mx == f64::NEG_INFINITY {
                        continue;
                    }
                    let mut s = 0.0;
                    for (j, &v) in row.iter().enumerate() {
                        if keep(j) {
                            s += (v - mx).exp();
                        }
                    }
                    let lse = mx + s.ln();
                    for (j, &v) in row.iter().enumerate() {
                        if keep(j) {
                            out.set(i, j, v - lse);
                        }
                    }
                }
                out
            }
            Op::SegmentSum { x, segments, count } => {
                let x = val(x);
                if segments.len() != x.rows() {
                    return Err(shape_err(
                        "segment_sum",
                        format!("{} segment ids for {} rows", segments.len(), x.rows()),
                    ));
                }
                let mut out = Tensor::zeros(*count, x.cols());
                for (i, &s) in segments.iter().enumerate() {
                    if s >= *count {
                        return Err(shape_err("segment_sum", format!("segment {s} >= {count}")));
                    }
                    for (o, v) in out.row_mut(s).iter_mut().zip(x.row(i)) {
                        *o += v;
                    }
                }
                out
            }
            Op::Gather { x, at } => {
                let x = val(x);
                let mut data = Vec::with_capacity(at.len());
                for &(r, c) in at.iter() {
                    if r >= x.rows() || c >= x.cols() {
                        return Err(shape_err("gather", format!("({r}, {c}) outside {:?}", x.shape())));
                    }
                    data.push(x.get(r, c));
                }
                Tensor::new(1, at.len(), data)?
            }
            Op::SelectRows { x, rows } => {
                let x = val(x);
                if let Some(&r) = rows.iter().find(|&&r| r >= x.rows()) {
                    return Err(shape_err("select_rows", format!("row {r} outside {:?}", x.shape())));
                }
                x.select_rows(rows)
            }
            Op::Sum(x) => Tensor::scalar(val(x).data().iter().sum()),
            Op::MeanCols(x) => {
                let x = val(x);
                let m = x.rows();
                let mut out = Tensor::zeros(1, x.cols());
                if m > 0 {
                    for i in 0..m {
                        for (o, v) in out.data_mut().iter_mut().zip(x.row(i)) {
                            *o += v;
                        }
                    }
                    for o in out.data_mut() {
                        *o /= m as f64;
                    }
                }
                out
            }
            Op::VarCols(x) => {
                let (mean, var) = column_stats(val(x));
                let _ = mean;
                Tensor::new(1, var.len(), var)?
            }
            Op::NormalizeRows(x) => {
                let x = val(x);
                let mut out = x.clone();
                let mut norms = Vec::with_capacity(x.rows());
                for i in 0..x.rows() {
                    let n = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n == 0.0 {
                        return Err(Error::ZeroNorm(i));
                    }
                    for o in out.row_mut(i) {
                        *o /= n;
                    }
                    norms.push(n);
                }
                return Ok((out, Aux::Norms(norms)));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                eps,
                running,
            } => {
                let (x, g, b) = (val(x), val(gamma), val(beta));
                let d = x.cols();
                if g.shape() != [1, d] || b.shape() != [1, d] {
                    return Err(shape_err(
                        "batch_norm",
                        format!("input {:?}, gamma {:?}, beta {:?}", x.shape(), g.shape(), b.shape()),
                    ));
                }
                let (mean, var_norm, batch_stats) = match running {
                    Some(stats) => (stats.0.clone(), stats.1.clone(), None),
                    None => {
                        let (mean, unbiased) = column_stats(x);
                        let m = x.rows() as f64;
                        let biased = if x.rows() > 1 {
                            unbiased.iter().map(|v| v * (m - 1.0) / m).collect()
                        } else {
                            vec![0.0; d]
                        };
                        (mean.clone(), biased, Some((mean, unbiased)))
                    }
                };
                if mean.len() != d || var_norm.len() != d {
                    return Err(shape_err("batch_norm", "running statistics width".into()));
                }
                let inv_std: Vec<f64> = var_norm.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
                let mut xhat = x.clone();
                let mut out = x.clone();
                for i in 0..x.rows() {
                    for j in 0..d {
                        let h = (x.get(i, j) - mean[j]) * inv_std[j];
                        xhat.set(i, j, h);
                        out.set(i, j, g.data()[j] * h + b.data()[j]);
                    }
                }
                return Ok((
                    out,
                    Aux::BatchNorm {
                        xhat,
                        inv_std,
                        batch_stats,
                    },
                ));
            }
            Op::ConcatCols(parts) => {
                let rows = parts.first().map_or(0, |p| val(p).rows());
                if parts.iter().any(|p| val(p).rows() != rows) {
                    return Err(shape_err("concat_cols", "row counts differ".into()));
                }
                let cols: usize = parts.iter().map(|p| val(p).cols()).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for p in parts {
                        data.extend_from_slice(val(p).row(i));
                    }
                }
                Tensor::new(rows, cols, data)?
            }
            Op::ConcatRows(parts) => {
                let cols = parts.first().map_or(0, |p| val(p).cols());
                if parts.iter().any(|p| val(p).cols() != cols) {
                    return Err(shape_err("concat_rows", "column counts differ".into()));
                }
                let rows: usize = parts.iter().map(|p| val(p).rows()).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for p in parts {
                    data.extend_from_slice(val(p).data());
                }
                Tensor::new(rows, cols, data)?
            }
            Op::Transpose(x) => val(x).transpose(),
        };
        Ok((out, Aux::None))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse-mode gradients of a `1×1` output with respect to every
    /// variable that requires a gradient.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.check(output)?;
        let shape = self.shape(output);
        if shape != [1, 1] {
            return Err(Error::NonScalarOutput(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.requires_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: &Var| &self.nodes[v.0].value;
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: &Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(e) => {
                    for (a, b) in e.data_mut().iter_mut().zip(t.data()) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(t),
            }
        };
        let elementwise = |x: &Tensor, f: &dyn Fn(f64, f64) -> f64| {
            let data = x.data().iter().zip(g.data()).map(|(&xv, &gv)| f(xv, gv)).collect();
            Tensor::new(x.rows(), x.cols(), data).expect("same shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, g.matmul(&val(b).transpose()).expect("shapes checked"));
                }
                if wants(b) {
                    acc(b, val(a).transpose().matmul(g).expect("shapes checked"));
                }
            }
            Op::SparseMatMul(s, x) => acc(x, spmm(&s.bwd, g)),
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a), val(b));
                if wants(a) {
                    acc(a, elementwise(bv, &|y, gv| y * gv));
                }
                if wants(b) {
                    acc(b, elementwise(av, &|x, gv| x * gv));
                }
            }
            Op::AddRow(x, r) => {
                acc(x, g.clone());
                if wants(r) {
                    let mut s = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in s.data_mut().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    acc(r, s);
                }
            }
            Op::Scale(x, c) => {
                let c = *c;
                acc(x, g.map(|v| v * c));
            }
            Op::AddScalar(x, _) => acc(x, g.clone()),
            Op::ScaleByVar(x, s) => {
                let c = val(s).item();
                if wants(x) {
                    acc(x, g.map(|v| v * c));
                }
                if wants(s) {
                    let d: f64 = val(x).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
                    acc(s, Tensor::scalar(d));
                }
            }
            Op::Relu(x) => acc(x, elementwise(val(x), &|v, gv| if v > 0.0 { gv } else { 0.0 })),
            Op::Square(x) => acc(x, elementwise(val(x), &|v, gv| 2.0 * v * gv)),
            Op::Abs(x) => acc(x, elementwise(val(x), &|v, gv| v.signum() * gv * f64::from(v != 0.0))),
            Op::Sqrt(x) => acc(x, elementwise(&node.value, &|y, gv| gv / (2.0 * y))),
            Op::RowLogSoftmax { x, mask_diagonal } => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let keep = |j: usize| !(*mask_diagonal && i == j);
                    let gsum: f64 = (0..y.cols()).filter(|&j| keep(j)).map(|j| g.get(i, j)).sum();
                    for j in (0..y.cols()).filter(|&j| keep(j)) {
                        dx.set(i, j, g.get(i, j) - y.get(i, j).exp() * gsum);
                    }
                }
                acc(x, dx);
            }
            Op::SegmentSum { x, segments, .. } => {
                let xs = val(x);
                let mut dx = Tensor::zeros(xs.rows(), xs.cols());
                for (i, &s) in segments.iter().enumerate() {
                    dx.row_mut(i).copy_from_slice(g.row(s));
                }
                acc(x, dx);
            }
            Op::Gather { x, at } => {
                let xs = val(x);
                let mut dx = Tensor::zeros(xs.rows(), xs.cols());
                for (k, &(r, c)) in at.iter().enumerate() {
                    let cur = dx.get(r, c);
                    dx.set(r, c, cur + g.data()[k]);
                }
                acc(x, dx);
            }
            Op::SelectRows { x, rows } => {
                let xs = val(x);
                let mut dx = Tensor::zeros(xs.rows(), xs.cols());
                for (k, &r) in rows.iter().enumerate() {
                    for (o, v) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                acc(x, dx);
            }
            Op::Sum(x) => {
                let xs = val(x);
                acc(x, Tensor::filled(xs.rows(), xs.cols(), g.item()));
            }
            Op::MeanCols(x) => {
                let xs = val(x);
                let m = xs.rows() as f64;
                let mut dx = Tensor::zeros(xs.rows(), xs.cols());
                for i in 0..xs.rows() {
                    for (o, v) in dx.row_mut(i).iter_mut().zip(g.data()) {
                        *o = v / m;
                    }
                }
                acc(x, dx);
            }
            Op::VarCols(x) => {
                let xs = val(x);
                let m = xs.rows();
                let mut dx = Tensor::zeros(xs.rows(), xs.cols());
                if m >= 2 {
                    let (mean, _) = column_stats(xs);
                    let scale = 2.0 / (m as f64 - 1.0);
                    for i in 0..m {
                        for j in 0..xs.cols() {
                            dx.set(i, j, scale * (xs.get(i, j) - mean[j]) * g.data()[j]);
                        }
                    }
                }
                acc(x, dx);
            }
            Op::NormalizeRows(x) => {
                let Aux::Norms(norms) = &node.aux else { unreachable!("norms recorded") };
                let y = &node.value;
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let dot: f64 = y.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                    for j in 0..y.cols() {
                        dx.set(i, j, (g.get(i, j) - y.get(i, j) * dot) / norms[i]);
                    }
                }
                acc(x, dx);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                running,
                ..
            } => {
                let Aux::BatchNorm { xhat, inv_std, .. } = &node.aux else {
                    unreachable!("batch norm cache recorded")
                };
                let (m, d) = (xhat.rows(), xhat.cols());
                let gam = val(gamma).data();
                let mut dgamma = Tensor::zeros(1, d);
                let mut dbeta = Tensor::zeros(1, d);
                for i in 0..m {
                    for j in 0..d {
                        dgamma.data_mut()[j] += g.get(i, j) * xhat.get(i, j);
                        dbeta.data_mut()[j] += g.get(i, j);
                    }
                }
                if wants(x) {
                    let mut dx = Tensor::zeros(m, d);
                    if running.is_some() {
                        for i in 0..m {
                            for j in 0..d {
                                dx.set(i, j, g.get(i, j) * gam[j] * inv_std[j]);
                            }
                        }
                    } else {
                        let mf = m as f64;
                        for j in 0..d {
                            let s1 = dbeta.data()[j] * gam[j];
                            let s2 = dgamma.data()[j] * gam[j];
                            for i in 0..m {
                                let dxh = g.get(i, j) * gam[j];
                                let v = inv_std[j] / mf * (mf * dxh - s1 - xhat.get(i, j) * s2);
                                dx.set(i, j, v);
                            }
                        }
                    }
                    acc(x, dx);
                }
                acc(gamma, dgamma);
                acc(beta, dbeta);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let c = val(p).cols();
                    let mut dp = Tensor::zeros(g.rows(), c);
                    for i in 0..g.rows() {
                        dp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + c]);
                    }
                    offset += c;
                    acc(p, dp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let [r, c] = val(p).shape();
                    let data = g.data()[offset * c..(offset + r) * c].to_vec();
                    offset += r;
                    acc(p, Tensor::new(r, c, data).expect("slice of gradient"));
                }
            }
            Op::Transpose(x) => acc(x, g.transpose()),
        }
    }
}

fn spmm(m: &SparseRows, x: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(m.n_rows, x.cols());
    for r in 0..m.n_rows {
        let (cols, vals) = m.row(r);
        let orow = out.row_mut(r);
        for (&c, &w) in cols.iter().zip(vals) {
            for (o, v) in orow.iter_mut().zip(x.row(c)) {
                *o += w * v;
            }
        }
    }
    out
}

/// Column means and unbiased column variances (zero variance below two rows).
fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (m, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for i in 0..m {
        for (a, v) in mean.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    if m > 0 {
        for a in &mut mean {
            *a /= m as f64;
        }
    }
    let mut var = vec![0.0; d];
    if m >= 2 {
        for i in 0..m {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        for v in &mut var {
            *v /= m as f64 - 1.0;
        }
    }
    (mean, var)
}

/// Gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` does not require one or does not
    /// influence the output.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn forward_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let eye = tape.constant(Tensor::identity(2));
        let y = tape.matmul(eye, x).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let s = tape
            .segment_sum(x, Arc::new(vec![0, 0]), 1)
            .unwrap();
        assert_eq!(tape.value(s).data(), &[4.0, 6.0]);

        let r = tape.constant(t(&[vec![-1.0, 0.0, 2.0]]));
        let r = tape.relu(r).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[vec![1.0, -2.0, 3.5]]));
        let sq = tape.square(x).unwrap();
        let s = tape.sum(sq).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, -4.0, 7.0]);
    }

    #[test]
    fn errors() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(2, 3));
        let b = tape.param(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
        assert!(matches!(tape.backward(a), Err(Error::NonScalarOutput([2, 3]))));
        assert!(matches!(tape.backward(Var(99)), Err(Error::UnknownVar(99))));
        assert!(matches!(tape.normalize_rows(a), Err(Error::ZeroNorm(0))));
    }

    #[test]
    fn replay_is_deterministic() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[vec![0.3, -1.2], vec![2.0, 0.7]]));
        let c = tape.cosine_similarity_matrix(x).unwrap();
        let l = tape.row_log_softmax(c, true).unwrap();
        let s = tape.sum(l).unwrap();
        let first = tape.value(s).clone();
        let out = tape
            .evaluate(&[(x, t(&[vec![0.3, -1.2], vec![2.0, 0.7]]))], &[s])
            .unwrap();
        assert_eq!(out[0].data()[0].to_bits(), first.data()[0].to_bits());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::ones(1, 2));
        let c = tape.constant(Tensor::ones(1, 2));
        let y = tape.mul(x, c).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn batch_norm_eval_uses_running_stats() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[vec![1.0], vec![3.0]]));
        let g = tape.param(Tensor::ones(1, 1));
        let b = tape.param(Tensor::zeros(1, 1));
        let y = tape
            .batch_norm(x, g, b, 0.0, Some(Arc::new((vec![1.0], vec![4.0]))))
            .unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 1.0]);
        let y = tape.batch_norm(x, g, b, 0.0, None).unwrap();
        assert_eq!(tape.value(y).data(), &[-1.0, 1.0]);
        let (mean, var) = tape.batch_norm_stats(y).unwrap();
        assert_eq!((mean[0], var[0]), (2.0, 2.0));
    }
}
