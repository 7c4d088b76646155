//! Zachary's karate club, 0-indexed, labelled by the club each member joined.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::graph::{graph_from_edge_set, SparseGraph};

pub const KARATE_EDGES: [(usize, usize); 78] = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10), (0, 11),
    (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3), (1, 7), (1, 13),
    (1, 17), (1, 19), (1, 21), (1, 30), (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27),
    (2, 28), (2, 32), (3, 7), (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16),
    (6, 16), (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33), (15, 32), (15, 33),
    (18, 32), (18, 33), (19, 33), (20, 32), (20, 33), (22, 32), (22, 33), (23, 25), (23, 27), (23, 29),
    (23, 32), (23, 33), (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33), (28, 31),
    (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32), (31, 33), (32, 33),
];

/// Members who sided with the instructor; everyone else joined the officer.
pub const KARATE_MR_HI: [usize; 17] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 16, 17, 19, 21];

pub const KARATE_FEATURE_DIM: usize = 10;

/// The club graph with 10 features per node: `(A + I)·R` for a standard normal
/// `R` drawn from `feature_seed`.
pub fn karate_club(feature_seed: u64) -> Result<SparseGraph> {
    let n = 34;
    let g = graph_from_edge_set(n, KARATE_EDGES);
    let labels: Vec<usize> = (0..n)
        .map(|i| usize::from(!KARATE_MR_HI.contains(&i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(feature_seed);
    let r = Array2::from_shape_fn((n, KARATE_FEATURE_DIM), |_| StandardNormal.sample(&mut rng));
    let mut x = g.adjacency().mul_dense(&r);
    x += &r;
    g.with_features(x)?.with_node_labels(labels)
}
