//! Dense reverse-mode differentiation.
//!
//! A [`Tape`] records every operation in execution order, so the node list is
//! already topologically sorted and [`Tape::backward`] is a single reverse
//! sweep. Values are dense `f64` matrices; the only sparse object is a
//! constant CSR left operand of [`Tape::sparse_matmul`].

use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::{inv_sqrt_or_zero, CsrMatrix};

pub type Matrix = Array2<f64>;

/// Lower clamp applied to every denominator of [`Tape::trace_ratio`].
pub const TRACE_EPS: f64 = 1e-10;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    SparseMatMul(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    TraceRatio(Var, Var),
    ColumnNorms(Var),
    Sum(Var),
    MeanRows(Var),
    CrossEntropy(Var, Vec<usize>),
    SymNormalize(Var),
    ZeroDiagonal(Var),
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar loss with respect to every recorded value.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`; zero when `v` does not influence the loss.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Matrix::zeros(self.shapes[v.0]),
        }
    }
}

fn shape(m: &Matrix) -> (usize, usize) {
    m.dim()
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

    /// Drops every recorded node so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    fn push(&mut self, value: Matrix, op: Op, op_name: &'static str) -> Result<Var> {
        if !value.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let tracked = match &op {
            Op::Leaf => true,
            Op::Constant => false,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddRow(a, b)
            | Op::Mul(a, b)
            | Op::TraceRatio(a, b) => self.nodes[a.0].tracked || self.nodes[b.0].tracked,
            Op::SparseMatMul(_, a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::SoftmaxRows(a)
            | Op::Transpose(a)
            | Op::ColumnNorms(a)
            | Op::Sum(a)
            | Op::MeanRows(a)
            | Op::CrossEntropy(a, _)
            | Op::SymNormalize(a)
            | Op::ZeroDiagonal(a) => self.nodes[a.0].tracked,
            Op::ConcatCols(vs) => vs.iter().any(|v| self.nodes[v.0].tracked),
        };
        self.nodes.push(Node { value, op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A differentiable input (parameter).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, "leaf")
            .expect("leaf values must be finite")
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, "constant")
            .expect("constant values must be finite")
    }

    pub fn scalar_constant(&mut self, x: f64) -> Var {
        self.constant(Matrix::from_elem((1, 1), x))
    }

    /// Constant copy of `v`'s current value; gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::ShapeMismatch {
            op,
            left: self.shape(a),
            right: self.shape(b),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(self.mismatch("matmul", a, b));
        }
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b), "matmul")
    }

    pub fn sparse_matmul(&mut self, lhs: &Arc<CsrMatrix>, b: Var) -> Result<Var> {
        if lhs.shape().1 != self.shape(b).0 {
            return Err(Error::ShapeMismatch {
                op: "sparse_matmul",
                left: lhs.shape(),
                right: self.shape(b),
            });
        }
        let value = lhs.mul_dense(self.value(b));
        self.push(value, Op::SparseMatMul(Arc::clone(lhs), b), "sparse_matmul")
    }

    /// Element-wise sum of equally shaped values, or a `1×C` row broadcast
    /// over every row of an `N×C` left operand.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            let value = self.value(a) + self.value(b);
            self.push(value, Op::Add(a, b), "add")
        } else if sb.0 == 1 && sb.1 == sa.1 {
            let value = self.value(a) + self.value(b);
            self.push(value, Op::AddRow(a, b), "add")
        } else {
            Err(self.mismatch("add", a, b))
        }
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c), "scale")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("mul", a, b));
        }
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b), "mul")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a), "relu")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let total = row.sum();
            row /= total;
        }
        self.push(value, Op::SoftmaxRows(a), "softmax_rows")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a), "transpose")
    }

    /// `Σ_k numer_kk / max(denom_kk, ε)` for square, equally sized operands.
    pub fn trace_ratio(&mut self, numer: Var, denom: Var) -> Result<Var> {
        let (sn, sd) = (self.shape(numer), self.shape(denom));
        if sn != sd || sn.0 != sn.1 {
            return Err(self.mismatch("trace_ratio", numer, denom));
        }
        let (n, d) = (self.value(numer), self.value(denom));
        let total: f64 = (0..sn.0).map(|k| n[[k, k]] / d[[k, k]].max(TRACE_EPS)).sum();
        self.push(
            Matrix::from_elem((1, 1), total),
            Op::TraceRatio(numer, denom),
            "trace_ratio",
        )
    }

    /// Euclidean norm of every column, as a `1×C` row.
    pub fn column_norms(&mut self, a: Var) -> Result<Var> {
        let value = self
            .value(a)
            .map_axis(Axis(0), |col| col.dot(&col).sqrt())
            .insert_axis(Axis(0));
        self.push(value, Op::ColumnNorms(a), "column_norms")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).sum();
        self.push(Matrix::from_elem((1, 1), total), Op::Sum(a), "sum")
    }

    /// Column means, as a `1×C` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (r, _) = self.shape(a);
        if r == 0 {
            return Err(Error::InvalidArgument("mean over zero rows".into()));
        }
        let value = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        self.push(value, Op::MeanRows(a), "mean_rows")
    }

    /// Mean softmax cross entropy of `logits` (one row per sample) against
    /// integer class targets.
    pub fn cross_entropy_logits(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if targets.len() != r || r == 0 {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy_logits",
                left: (r, c),
                right: (targets.len(), 1),
            });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::InvalidArgument(format!(
                "target class {t} out of range for {c} logits"
            )));
        }
        let z = self.value(logits);
        let mut total = 0.0;
        for (row, &t) in z.rows().into_iter().zip(targets) {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        self.push(
            Matrix::from_elem((1, 1), total / r as f64),
            Op::CrossEntropy(logits, targets.to_vec()),
            "cross_entropy_logits",
        )
    }

    /// `D^{-1/2} A D^{-1/2}` of a dense square value with `D = diag(A 1)`;
    /// zero-degree rows and columns map to zero.
    pub fn sym_normalize(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if r != c {
            return Err(self.mismatch("sym_normalize", a, a));
        }
        let m = self.value(a);
        let inv: Vec<f64> = m.rows().into_iter().map(|row| inv_sqrt_or_zero(row.sum())).collect();
        let value = Matrix::from_shape_fn((r, r), |(i, j)| inv[i] * m[[i, j]] * inv[j]);
        self.push(value, Op::SymNormalize(a), "sym_normalize")
    }

    pub fn zero_diagonal(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if r != c {
            return Err(self.mismatch("zero_diagonal", a, a));
        }
        let mut value = self.value(a).clone();
        value.diag_mut().fill(0.0);
        self.push(value, Op::ZeroDiagonal(a), "zero_diagonal")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.shape(p).0,
            None => return Err(Error::InvalidArgument("concat of nothing".into())),
        };
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(self.mismatch("concat_cols", parts[0], p));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.push(value, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NotScalar { rows: r, cols: c });
        }
        self.consumed = true;

        let shapes: Vec<_> = self.nodes.iter().map(|n| shape(&n.value)).collect();
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                grads[idx] = Some(g);
                continue;
            }
            let send = |grads: &mut Vec<Option<Matrix>>, v: Var, delta: Matrix| {
                if !self.nodes[v.0].tracked {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &delta,
                    slot => *slot = Some(delta),
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    send(&mut grads, *a, g.dot(&val(*b).t()));
                    send(&mut grads, *b, val(*a).t().dot(&g));
                }
                Op::SparseMatMul(lhs, b) => {
                    send(&mut grads, *b, lhs.transpose_mul_dense(&g));
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, b) => {
                    send(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(&mut grads, *a, g.clone());
                }
                Op::Scale(a, k) => send(&mut grads, *a, &g * *k),
                Op::Mul(a, b) => {
                    send(&mut grads, *a, &g * val(*b));
                    send(&mut grads, *b, &g * val(*a));
                }
                Op::Relu(a) => {
                    let mask = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    send(&mut grads, *a, &g * &mask);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let gy = &g * y;
                    let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(&mut grads, *a, y * &(&g - &dot));
                }
                Op::Transpose(a) => send(&mut grads, *a, g.t().to_owned()),
                Op::TraceRatio(n, d) => {
                    let gs = g[[0, 0]];
                    let (nv, dv) = (val(*n), val(*d));
                    let k = nv.nrows();
                    let mut gn = Matrix::zeros((k, k));
                    let mut gd = Matrix::zeros((k, k));
                    for i in 0..k {
                        let den = dv[[i, i]];
                        gn[[i, i]] = gs / den.max(TRACE_EPS);
                        if den > TRACE_EPS {
                            gd[[i, i]] = -gs * nv[[i, i]] / (den * den);
                        }
                    }
                    send(&mut grads, *n, gn);
                    send(&mut grads, *d, gd);
                }
                Op::ColumnNorms(a) => {
                    let av = val(*a);
                    let norms = &node.value;
                    let mut ga = av.clone();
                    for (j, mut col) in ga.columns_mut().into_iter().enumerate() {
                        let nj = norms[[0, j]];
                        let coef = if nj > 0.0 { g[[0, j]] / nj } else { 0.0 };
                        col *= coef;
                    }
                    send(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let gs = g[[0, 0]];
                    send(&mut grads, *a, Matrix::from_elem(shapes[a.0], gs));
                }
                Op::MeanRows(a) => {
                    let (r, _) = shapes[a.0];
                    let row = &g / r as f64;
                    let ga = row
                        .broadcast(shapes[a.0])
                        .expect("row broadcast")
                        .to_owned();
                    send(&mut grads, *a, ga);
                }
                Op::CrossEntropy(a, targets) => {
                    let z = val(*a);
                    let scale = g[[0, 0]] / targets.len() as f64;
                    let mut ga = z.clone();
                    for (mut row, &t) in ga.rows_mut().into_iter().zip(targets) {
                        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                        row.mapv_inplace(|x| (x - max).exp());
                        let total = row.sum();
                        row /= total;
                        row[t] -= 1.0;
                        row *= scale;
                    }
                    send(&mut grads, *a, ga);
                }
                Op::SymNormalize(a) => {
                    let av = val(*a);
                    let n = av.nrows();
                    let deg: Vec<f64> = av.rows().into_iter().map(|r| r.sum()).collect();
                    let inv: Vec<f64> = deg.iter().map(|&d| inv_sqrt_or_zero(d)).collect();
                    // dL/dr_i collects the row-i and column-i appearances of r_i
                    let mut d_inv = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            let t = g[[i, j]] * av[[i, j]];
                            d_inv[i] += t * inv[j];
                            d_inv[j] += t * inv[i];
                        }
                    }
                    let row_term: Vec<f64> = (0..n)
                        .map(|i| {
                            if deg[i] > 0.0 {
                                -0.5 * d_inv[i] * inv[i] / deg[i]
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let ga = Matrix::from_shape_fn((n, n), |(i, j)| {
                        g[[i, j]] * inv[i] * inv[j] + row_term[i]
                    });
                    send(&mut grads, *a, ga);
                }
                Op::ZeroDiagonal(a) => {
                    let mut ga = g.clone();
                    ga.diag_mut().fill(0.0);
                    send(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = shapes[p.0].1;
                        send(&mut grads, p, g.slice(s![.., offset..offset + w]).to_owned());
                        offset += w;
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }
}

pub mod gradcheck {
    //! Central finite-difference gradient checking.

    use super::{Matrix, Tape, Var};
    use crate::error::Result;

    pub const STEP: f64 = 1e-5;

    /// Relative max-norm discrepancy between analytic and numerical
    /// gradients of `build` with respect to each of `inputs`.
    ///
    /// Entries where both gradients are below `1e-8` in magnitude are
    /// ignored. Returns `0.0` when every gradient entry is negligible.
    pub fn max_relative_error<F>(inputs: &[Matrix], build: F) -> Result<f64>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    {
        let eval = |values: &[Matrix]| -> Result<f64> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = values.iter().map(|m| tape.leaf(m.clone())).collect();
            let out = build(&mut tape, &vars)?;
            Ok(tape.scalar(out))
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = build(&mut tape, &vars)?;
        let grads = tape.backward(out)?;

        let mut worst = 0.0f64;
        let mut values: Vec<Matrix> = inputs.to_vec();
        for (k, &v) in vars.iter().enumerate() {
            let analytic = grads.wrt(v);
            let mut numeric = Matrix::zeros(analytic.dim());
            for idx in 0..analytic.len() {
                let (i, j) = (idx / analytic.ncols(), idx % analytic.ncols());
                let orig = values[k][[i, j]];
                values[k][[i, j]] = orig + STEP;
                let up = eval(&values)?;
                values[k][[i, j]] = orig - STEP;
                let down = eval(&values)?;
                values[k][[i, j]] = orig;
                numeric[[i, j]] = (up - down) / (2.0 * STEP);
            }
            let scale = analytic
                .iter()
                .chain(numeric.iter())
                .fold(0.0f64, |m, x| m.max(x.abs()));
            if scale <= 1e-8 {
                continue;
            }
            let diff = analytic
                .iter()
                .zip(numeric.iter())
                .filter(|(a, n)| a.abs().max(n.abs()) > 1e-8)
                .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
            worst = worst.max(diff / scale);
        }
        Ok(worst)
    }
}
