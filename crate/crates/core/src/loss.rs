//! Unsupervised clustering objectives and their combination.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::motif::MotifAdjacency;

/// Constant sparse operands of the motif conductance loss.
#[derive(Clone, Debug)]
pub struct MotifOperator {
    pub a: Arc<CsrMatrix>,
    pub d: Arc<CsrMatrix>,
}

impl MotifOperator {
    pub fn new(m: &MotifAdjacency) -> Self {
        Self::from_matrix(m.a_m.clone())
    }

    pub fn from_matrix(a: CsrMatrix) -> Self {
        let d = CsrMatrix::diagonal(&a.row_sums());
        Self {
            a: Arc::new(a),
            d: Arc::new(d),
        }
    }

    pub fn n(&self) -> usize {
        self.a.shape().0
    }

    pub fn is_zero(&self) -> bool {
        self.a.nnz() == 0
    }
}

/// `(Sᵀ M S)` for a constant sparse `M`.
fn quadratic(tape: &mut Tape, s: Var, m: &Arc<CsrMatrix>) -> Result<Var> {
    let ms = tape.sparse_matmul(m, s)?;
    let st = tape.transpose(s)?;
    tape.matmul(st, ms)
}

/// `−(1/K) Σ_k (SᵀA_M S)_kk / max((SᵀD_M S)_kk, ε)`; a constant 0 when `A_M` is empty.
pub fn loss_mc(tape: &mut Tape, s: Var, m: &MotifOperator) -> Result<Var> {
    let (n, k) = tape.shape(s);
    if n != m.n() {
        return Err(Error::ShapeMismatch {
            op: "loss_mc",
            left: (n, k),
            right: m.a.shape(),
        });
    }
    if m.is_zero() {
        return Ok(tape.scalar_constant(0.0));
    }
    let num = quadratic(tape, s, &m.a)?;
    let den = quadratic(tape, s, &m.d)?;
    let ratio = tape.trace_ratio(num, den)?;
    tape.scale(ratio, -1.0 / k as f64)
}

/// `α₁ L_mc(A) + α₂ L_mc(A_M)`; a term with a zero weight is left out entirely.
pub fn loss_mc_combined(
    tape: &mut Tape,
    s: Var,
    edge: &MotifOperator,
    tri: &MotifOperator,
    alpha1: f64,
    alpha2: f64,
) -> Result<Var> {
    let mut terms = Vec::with_capacity(2);
    for (alpha, op) in [(alpha1, edge), (alpha2, tri)] {
        if alpha != 0.0 {
            let l = loss_mc(tape, s, op)?;
            terms.push(if alpha == 1.0 { l } else { tape.scale(l, alpha)? });
        }
    }
    match terms[..] {
        [] => Ok(tape.scalar_constant(0.0)),
        [one] => Ok(one),
        [a, b] => tape.add(a, b),
        _ => unreachable!(),
    }
}

/// `(√K − (1/√N) Σ_j ‖S_{*j}‖) / (√K − 1)`.
pub fn loss_ortho(tape: &mut Tape, s: Var) -> Result<Var> {
    let (n, k) = tape.shape(s);
    if k < 2 {
        return Err(Error::InvalidArgument("orthogonality loss needs K >= 2".into()));
    }
    let sqrt_k = (k as f64).sqrt();
    let norms = tape.column_norms(s)?;
    let total = tape.sum(norms)?;
    let scaled = tape.scale(total, -1.0 / ((n as f64).sqrt() * (sqrt_k - 1.0)))?;
    let offset = tape.scalar_constant(sqrt_k / (sqrt_k - 1.0));
    tape.add(scaled, offset)
}

/// `−Tr(SᵀÃS) / Tr(SᵀD̃S)`: one global ratio, the objective MinCutPool
/// effectively optimises.
pub fn loss_mincut_ablation(
    tape: &mut Tape,
    s: Var,
    adj_norm: &Arc<CsrMatrix>,
    deg_norm: &Arc<CsrMatrix>,
) -> Result<Var> {
    let a_s = tape.sparse_matmul(adj_norm, s)?;
    let d_s = tape.sparse_matmul(deg_norm, s)?;
    let na = tape.mul(s, a_s)?;
    let nd = tape.mul(s, d_s)?;
    let num = tape.sum(na)?;
    let den = tape.sum(nd)?;
    let ratio = tape.trace_ratio(num, den)?;
    tape.scale(ratio, -1.0)
}

/// `L_mc + μ L_o + L_sup`.
pub fn total_loss(
    tape: &mut Tape,
    l_mc: Var,
    l_o: Option<Var>,
    l_sup: Option<Var>,
    mu: f64,
) -> Result<Var> {
    if mu < 0.0 {
        return Err(Error::InvalidArgument(format!("mu must be >= 0, got {mu}")));
    }
    let mut total = l_mc;
    if let Some(l_o) = l_o {
        if mu != 0.0 {
            let w = tape.scale(l_o, mu)?;
            total = tape.add(total, w)?;
        }
    }
    if let Some(l_sup) = l_sup {
        total = tape.add(total, l_sup)?;
    }
    Ok(total)
}

/// Linear decay of the triangle weight from `alpha2_start` to `alpha2_floor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSchedule {
    pub alpha2_start: f64,
    pub alpha2_floor: f64,
    pub ramp_epochs: usize,
}

impl AlphaSchedule {
    /// Start 1, floor 0.5, reached after half of `max_epochs`.
    pub fn default_for(max_epochs: usize) -> Self {
        Self {
            alpha2_start: 1.0,
            alpha2_floor: 0.5,
            ramp_epochs: (max_epochs / 2).max(1),
        }
    }

    /// Constant weights `(1 − α₂, α₂)`.
    pub fn fixed(alpha2: f64) -> Self {
        Self {
            alpha2_start: alpha2,
            alpha2_floor: alpha2,
            ramp_epochs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.alpha2_start)
            && (0.0..=1.0).contains(&self.alpha2_floor)
            && self.alpha2_floor <= self.alpha2_start;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "alpha schedule needs 0 <= floor <= start <= 1, got {self:?}"
            )))
        }
    }
}

/// `(α₁, α₂)` at `epoch`.
pub fn alpha_at(schedule: &AlphaSchedule, epoch: usize) -> (f64, f64) {
    let AlphaSchedule {
        alpha2_start: start,
        alpha2_floor: floor,
        ramp_epochs,
    } = *schedule;
    let ramp = ramp_epochs.max(1) as f64;
    let alpha2 = (start - epoch as f64 * (start - floor) / ramp).max(floor);
    (1.0 - alpha2, alpha2)
}
