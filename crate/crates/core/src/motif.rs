//! Motif adjacency matrices and exact motif cut/volume counting.
//!
//! The triangle motif has a fast path, `A_M = (A·A) ⊙ A`. Every motif also
//! has a brute-force instance enumerator that serves as the oracle for the
//! fast path and for the cut identities relating motif cuts in `G` to
//! ordinary cuts in the motif graph `G_M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DegreeVector, SparseGraph};

/// Largest graph the enumeration oracles accept.
pub const ORACLE_LIMIT: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    Edge,
    Triangle,
    FourCycle,
    K4,
}

impl Motif {
    /// Number of nodes in one instance.
    pub fn order(self) -> usize {
        match self {
            Motif::Edge => 2,
            Motif::Triangle => 3,
            Motif::FourCycle | Motif::K4 => 4,
        }
    }
}

/// Motif-weighted adjacency `A_M` together with its row sums `D_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotifAdjacency {
    pub motif: Motif,
    pub a_m: CsrMatrix,
    pub d_m: DegreeVector,
}

impl MotifAdjacency {
    pub fn new(motif: Motif, a_m: CsrMatrix) -> Self {
        let d_m = DegreeVector(a_m.row_sums());
        Self { motif, a_m, d_m }
    }

    pub fn n(&self) -> usize {
        self.a_m.shape().0
    }

    pub fn is_zero(&self) -> bool {
        self.a_m.nnz() == 0
    }

    /// Fraction of off-diagonal entries that are non-zero.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        self.a_m.nnz() as f64 / (n * (n - 1)) as f64
    }
}

/// Per-partition motif statistics obtained by instance enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MotifPartitionStats {
    /// Instances whose nodes fall into more than one cluster.
    pub cut_total: usize,
    /// For each cluster, instances with nodes both inside and outside it.
    pub cut: Vec<usize>,
    /// For each cluster, motif endpoints (instance-node incidences) inside it.
    pub vol: Vec<usize>,
    pub instances: usize,
}

/// The edge motif: `A` itself with its weighted degrees.
pub fn edge_adjacency(g: &SparseGraph) -> MotifAdjacency {
    MotifAdjacency::new(Motif::Edge, g.adjacency().clone())
}

/// `(B·B) ⊙ B` for the binarised pattern `B` of a square matrix, diagonal zeroed.
pub fn triangle_adjacency_of(a: &CsrMatrix) -> CsrMatrix {
    let n = a.shape().0;
    let mut scratch = vec![0u32; n];
    let mut triplets = Vec::new();
    for i in 0..n {
        for (k, _) in a.row(i) {
            if k == i {
                continue;
            }
            for (j, _) in a.row(k) {
                scratch[j] += 1;
            }
        }
        for (j, _) in a.row(i) {
            if j != i && scratch[j] > 0 {
                triplets.push((i, j, f64::from(scratch[j])));
            }
        }
        for (k, _) in a.row(i) {
            if k == i {
                continue;
            }
            for (j, _) in a.row(k) {
                scratch[j] = 0;
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// Triangle motif adjacency; `(A_M)_ij` counts triangles containing both `i` and `j`.
pub fn triangle_adjacency(g: &SparseGraph) -> MotifAdjacency {
    MotifAdjacency::new(Motif::Triangle, triangle_adjacency_of(g.adjacency()))
}

/// Number of triangles each node belongs to.
pub fn node_triangle_counts(m: &MotifAdjacency) -> Vec<usize> {
    debug_assert_eq!(m.motif, Motif::Triangle);
    m.d_m.0.iter().map(|d| (*d / 2.0).round() as usize).collect()
}

pub fn triangle_count(g: &SparseGraph) -> usize {
    let m = triangle_adjacency(g);
    (m.d_m.total() / 6.0).round() as usize
}

fn check_oracle_size(g: &SparseGraph) -> Result<()> {
    if g.n() > ORACLE_LIMIT {
        return Err(Error::SizeLimit {
            n: g.n(),
            limit: ORACLE_LIMIT,
        });
    }
    Ok(())
}

/// Enumerates motif instances as sorted node tuples.
///
/// A 4-node set carrying several distinct 4-cycles contributes one instance
/// per cycle (a `K4` holds three).
pub fn enumerate_instances(g: &SparseGraph, motif: Motif) -> Result<Vec<Vec<usize>>> {
    check_oracle_size(g)?;
    let n = g.n();
    let adj = |i: usize, j: usize| g.has_edge(i, j);
    let mut out = Vec::new();
    match motif {
        Motif::Edge => {
            for (i, j, _) in g.edges() {
                out.push(vec![i, j]);
            }
        }
        Motif::Triangle => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        if adj(i, j) && adj(j, k) && adj(i, k) {
                            out.push(vec![i, j, k]);
                        }
                    }
                }
            }
        }
        Motif::FourCycle | Motif::K4 => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        for l in k + 1..n {
                            let count = match motif {
                                Motif::K4 => usize::from(
                                    adj(i, j)
                                        && adj(i, k)
                                        && adj(i, l)
                                        && adj(j, k)
                                        && adj(j, l)
                                        && adj(k, l),
                                ),
                                _ => {
                                    // the three Hamiltonian cycles on {i, j, k, l}
                                    let c1 = adj(i, j) && adj(j, k) && adj(k, l) && adj(l, i);
                                    let c2 = adj(i, j) && adj(j, l) && adj(l, k) && adj(k, i);
                                    let c3 = adj(i, k) && adj(k, j) && adj(j, l) && adj(l, i);
                                    usize::from(c1) + usize::from(c2) + usize::from(c3)
                                }
                            };
                            for _ in 0..count {
                                out.push(vec![i, j, k, l]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `(A_M)_ij = Σ_v 1(i, j ∈ v, i ≠ j)` by exhaustive enumeration.
pub fn motif_adjacency_bruteforce(g: &SparseGraph, motif: Motif) -> Result<MotifAdjacency> {
    let instances = enumerate_instances(g, motif)?;
    let mut triplets = Vec::new();
    for inst in &instances {
        for (a, &i) in inst.iter().enumerate() {
            for &j in &inst[a + 1..] {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            }
        }
    }
    Ok(MotifAdjacency::new(
        motif,
        CsrMatrix::from_triplets(g.n(), g.n(), triplets),
    ))
}

fn cluster_count_of(partition: &[usize]) -> usize {
    partition.iter().max().map_or(0, |m| m + 1)
}

/// Motif cut and volume of every cluster, counted instance by instance.
pub fn motif_cut_vol(
    g: &SparseGraph,
    motif: Motif,
    partition: &[usize],
) -> Result<MotifPartitionStats> {
    if partition.len() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "partition has {} entries for {} nodes",
            partition.len(),
            g.n()
        )));
    }
    let instances = enumerate_instances(g, motif)?;
    let k = cluster_count_of(partition);
    let mut stats = MotifPartitionStats {
        cut_total: 0,
        cut: vec![0; k],
        vol: vec![0; k],
        instances: instances.len(),
    };
    let mut members = vec![0usize; k];
    for inst in &instances {
        members.iter_mut().for_each(|m| *m = 0);
        for &i in inst {
            members[partition[i]] += 1;
        }
        let touched = members.iter().filter(|&&m| m > 0).count();
        if touched > 1 {
            stats.cut_total += 1;
        }
        for (c, &m) in members.iter().enumerate() {
            stats.vol[c] += m;
            if m > 0 && m < inst.len() {
                stats.cut[c] += 1;
            }
        }
    }
    Ok(stats)
}

fn as_count(x: f64) -> u64 {
    debug_assert!(x >= 0.0 && x.fract() == 0.0);
    x as u64
}

/// Checks `cut_M(S_k) = ½ Σ_{i∈S_k, j∉S_k} (A_M)_ij` and
/// `vol_M(S_k) = ½ Σ_{i∈S_k} (D_M)_ii` for every cluster, in integers.
pub fn verify_triangle_identity(g: &SparseGraph, partition: &[usize]) -> Result<bool> {
    let stats = motif_cut_vol(g, Motif::Triangle, partition)?;
    let m = triangle_adjacency(g);
    let k = stats.vol.len();
    let mut cross = vec![0u64; k];
    let mut vol = vec![0u64; k];
    for (i, &ci) in partition.iter().enumerate() {
        vol[ci] += as_count(m.d_m.0[i]);
        for (j, v) in m.a_m.row(i) {
            if partition[j] != ci {
                cross[ci] += as_count(v);
            }
        }
    }
    Ok((0..k).all(|c| cross[c] == 2 * stats.cut[c] as u64 && vol[c] == 2 * stats.vol[c] as u64))
}

/// Checks `3·cut_M(S) + #{instances with exactly two nodes in S} = yᵀ L_M y`
/// for a 4-node motif, where `y` indicates `subset`.
pub fn verify_four_node_identity(g: &SparseGraph, motif: Motif, subset: &[bool]) -> Result<bool> {
    if motif.order() != 4 {
        return Err(Error::InvalidArgument(format!(
            "{motif:?} is not a 4-node motif"
        )));
    }
    if subset.len() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "subset has {} entries for {} nodes",
            subset.len(),
            g.n()
        )));
    }
    let instances = enumerate_instances(g, motif)?;
    let mut lhs = 0u64;
    for inst in &instances {
        let inside = inst.iter().filter(|&&i| subset[i]).count();
        if inside > 0 && inside < 4 {
            lhs += 3;
        }
        if inside == 2 {
            lhs += 1;
        }
    }
    let m = motif_adjacency_bruteforce(g, motif)?;
    let mut y_d_y = 0u64;
    let mut y_a_y = 0u64;
    for i in (0..g.n()).filter(|&i| subset[i]) {
        y_d_y += as_count(m.d_m.0[i]);
        for (j, v) in m.a_m.row(i) {
            if subset[j] {
                y_a_y += as_count(v);
            }
        }
    }
    Ok(lhs == y_d_y - y_a_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SparseGraph {
        let e: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        build_graph(&e, n, None).unwrap()
    }

    fn complete(n: usize) -> SparseGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j));
            }
        }
        graph(n, &e)
    }

    fn two_triangles() -> SparseGraph {
        graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    fn off_diagonal_all(m: &MotifAdjacency, value: f64) -> bool {
        let n = m.n();
        (0..n).all(|i| (0..n).all(|j| m.a_m.get(i, j) == if i == j { 0.0 } else { value }))
    }

    #[test]
    fn triangle_adjacency_examples() {
        let m = triangle_adjacency(&complete(3));
        assert!(off_diagonal_all(&m, 1.0));
        assert_eq!(m.d_m.0, vec![2.0; 3]);

        let p3 = triangle_adjacency(&graph(3, &[(0, 1), (1, 2)]));
        assert!(p3.is_zero());

        assert!(off_diagonal_all(&triangle_adjacency(&complete(4)), 2.0));
    }

    #[test]
    fn weighted_input_is_binarised() {
        let g = build_graph(&[(0, 1, 3.0), (1, 2, 0.5), (0, 2, 2.0)], 3, None).unwrap();
        assert!(off_diagonal_all(&triangle_adjacency(&g), 1.0));
    }

    #[test]
    fn bruteforce_examples() {
        let k3 = complete(3);
        assert_eq!(
            motif_adjacency_bruteforce(&k3, Motif::Triangle).unwrap().a_m,
            triangle_adjacency(&k3).a_m
        );
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(off_diagonal_all(
            &motif_adjacency_bruteforce(&c4, Motif::FourCycle).unwrap(),
            1.0
        ));
        assert!(off_diagonal_all(
            &motif_adjacency_bruteforce(&complete(4), Motif::K4).unwrap(),
            1.0
        ));
        // K4 holds three distinct 4-cycles, each covering every pair
        assert!(off_diagonal_all(
            &motif_adjacency_bruteforce(&complete(4), Motif::FourCycle).unwrap(),
            3.0
        ));
    }

    #[test]
    fn oracle_size_limit() {
        let g = build_graph(&[], ORACLE_LIMIT + 1, None).unwrap();
        assert!(matches!(
            motif_adjacency_bruteforce(&g, Motif::Triangle),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn cut_vol_examples() {
        let k3 = complete(3);
        let s = motif_cut_vol(&k3, Motif::Triangle, &[0, 0, 0]).unwrap();
        assert_eq!((s.cut_total, s.vol.clone()), (0, vec![3]));

        let s = motif_cut_vol(&k3, Motif::Triangle, &[0, 1, 1]).unwrap();
        assert_eq!((s.cut_total, s.vol.clone()), (1, vec![1, 2]));
        assert_eq!(s.cut, vec![1, 1]);

        let s = motif_cut_vol(&two_triangles(), Motif::Triangle, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!((s.cut_total, s.vol), (0, vec![3, 3]));
    }

    #[test]
    fn triangle_identity_examples() {
        let k3 = complete(3);
        for p in [[0, 0, 0], [0, 1, 1], [0, 1, 2], [1, 0, 1]] {
            assert!(verify_triangle_identity(&k3, &p).unwrap());
        }
        let empty = build_graph(&[], 5, None).unwrap();
        assert!(verify_triangle_identity(&empty, &[0, 1, 0, 1, 2]).unwrap());
    }

    #[test]
    fn four_node_identity_examples() {
        let k4 = complete(4);
        assert!(verify_four_node_identity(&k4, Motif::K4, &[true, false, false, false]).unwrap());
        assert!(verify_four_node_identity(&k4, Motif::K4, &[true, true, false, false]).unwrap());
        assert!(verify_four_node_identity(&k4, Motif::FourCycle, &[true, true, false, false]).unwrap());
        assert!(verify_four_node_identity(&k4, Motif::Triangle, &[true; 4]).is_err());
    }

    #[test]
    fn motif_degree_sums_to_six_per_triangle() {
        let g = complete(5);
        let m = triangle_adjacency(&g);
        assert_eq!(m.d_m.total(), 6.0 * 10.0);
        assert_eq!(triangle_count(&g), 10);
        assert_eq!(node_triangle_counts(&m), vec![6; 5]);
    }
}
