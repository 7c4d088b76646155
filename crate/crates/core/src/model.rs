//! Trainable layers: the GCN layer with a skip connection and the MLP head.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named dense parameter matrices owned by one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    /// Records every parameter as a leaf; the returned vars are indexed by `ParamId`.
    pub fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|m| tape.leaf(m.clone())).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|m| m.len()).sum()
    }
}

/// Uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

/// Propagation operator of a message-passing layer.
#[derive(Clone, Copy, Debug)]
pub enum Propagation<'a> {
    /// Constant normalised sparse adjacency of an input graph.
    Sparse(&'a Arc<CsrMatrix>),
    /// Normalised dense adjacency recorded on the tape (pooled graphs).
    Dense(Var),
}

impl Propagation<'_> {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Propagation::Sparse(a) => tape.sparse_matmul(a, x),
            Propagation::Dense(a) => tape.matmul(*a, x),
        }
    }
}

/// `ReLU(Ã X Θ₁ + X Θ₂)`, no bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcnSkipParams {
    pub theta1: ParamId,
    pub theta2: ParamId,
    pub f_in: usize,
    pub f_out: usize,
}

impl GcnSkipParams {
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        f_in: usize,
        f_out: usize,
        rng: &mut R,
    ) -> Self {
        let theta1 = params.add(format!("{prefix}.theta1"), glorot_uniform(f_in, f_out, rng));
        let theta2 = params.add(format!("{prefix}.theta2"), glorot_uniform(f_in, f_out, rng));
        Self {
            theta1,
            theta2,
            f_in,
            f_out,
        }
    }
}

pub fn gcn_skip_forward(
    tape: &mut Tape,
    adj: Propagation<'_>,
    x: Var,
    p: &GcnSkipParams,
    vars: &[Var],
) -> Result<Var> {
    let ax = adj.apply(tape, x)?;
    let msg = tape.matmul(ax, vars[p.theta1.0])?;
    let skip = tape.matmul(x, vars[p.theta2.0])?;
    let pre = tape.add(msg, skip)?;
    tape.relu(pre)
}

/// Fully connected layers with ReLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpParams {
    pub layers: Vec<(ParamId, ParamId)>,
    pub widths: Vec<usize>,
}

impl MlpParams {
    /// `widths` lists input, hidden and output sizes, e.g. `[F, 32, K]`.
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "MLP widths {widths:?} need at least two positive entries"
            )));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let weight = params.add(format!("{prefix}.{l}.weight"), glorot_uniform(w[0], w[1], rng));
                let bias = params.add(format!("{prefix}.{l}.bias"), Matrix::zeros((1, w[1])));
                (weight, bias)
            })
            .collect();
        Ok(Self {
            layers,
            widths: widths.to_vec(),
        })
    }

    pub fn out_width(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }
}

/// Pre-activation output of the last layer.
pub fn mlp_logits(tape: &mut Tape, x: Var, p: &MlpParams, vars: &[Var]) -> Result<Var> {
    let mut h = x;
    for (l, &(w, b)) in p.layers.iter().enumerate() {
        let z = tape.matmul(h, vars[w.0])?;
        h = tape.add(z, vars[b.0])?;
        if l + 1 < p.layers.len() {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// Soft cluster assignment `S = softmax(MLP(X))`.
pub fn assignment_forward(tape: &mut Tape, x: Var, p: &MlpParams, vars: &[Var]) -> Result<Var> {
    if p.out_width() < 2 {
        return Err(Error::InvalidArgument("assignment needs K >= 2".into()));
    }
    let logits = mlp_logits(tape, x, p, vars)?;
    tape.softmax_rows(logits)
}

/// Hard labels from soft assignments; ties go to the lowest index.
pub fn argmax_rows(s: &Matrix) -> Vec<usize> {
    s.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Row-stochastic `N×K` matrix with a one-hot row per node.
pub fn one_hot(labels: &[usize], k: usize) -> Matrix {
    let mut s = Matrix::zeros((labels.len(), k));
    for (i, &c) in labels.iter().enumerate() {
        s[[i, c]] = 1.0;
    }
    s
}
