//! Coarsening a graph through a soft cluster assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::model::{one_hot, Propagation};

/// Coarsened graph recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct PooledGraph {
    /// `SᵀAS` before self-loop removal and normalisation.
    pub raw: Var,
    /// Normalised pooled adjacency, zero diagonal.
    pub adj_pool: Var,
    pub x_pool: Var,
    pub s_used: Var,
}

/// `A_pool = norm(offdiag(SᵀAS))`, `X_pool = SᵀX`.
pub fn coarsen(tape: &mut Tape, adj: Propagation<'_>, x: Var, s: Var) -> Result<PooledGraph> {
    let st = tape.transpose(s)?;
    let a_s = adj.apply(tape, s)?;
    let raw = tape.matmul(st, a_s)?;
    let no_loops = tape.zero_diagonal(raw)?;
    let adj_pool = tape.sym_normalize(no_loops)?;
    let x_pool = tape.matmul(st, x)?;
    Ok(PooledGraph {
        raw,
        adj_pool,
        x_pool,
        s_used: s,
    })
}

/// Each node goes one-hot to a uniformly drawn cluster.
pub fn random_assignment(n: usize, k: usize, seed: u64) -> Result<Matrix> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "random assignment needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    Ok(one_hot(&labels, k))
}

/// `max(1, floor(n·ratio))`.
pub fn cluster_count(n: usize, ratio: f64) -> usize {
    assert!(ratio > 0.0 && ratio < 1.0, "pool ratio must lie in (0, 1)");
    ((n as f64 * ratio).floor() as usize).max(1)
}
