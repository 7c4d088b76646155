//! Clustering quality measures and collapse diagnostics.
//!
//! NMI is normalised by `sqrt(H(pred) · H(truth))`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, SparseGraph};
use crate::model::argmax_rows;
use crate::motif::triangle_adjacency;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub nmi: f64,
    pub completeness: f64,
    pub homogeneity: f64,
    pub modularity: f64,
    pub conductance: f64,
    pub motif_conductance: f64,
    pub cluster_usage_entropy: f64,
    pub clusters_used_fraction: f64,
}

fn entropy_of_counts<'a>(counts: impl Iterator<Item = &'a usize>, n: f64) -> f64 {
    counts
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

struct Contingency {
    n: f64,
    joint: HashMap<(usize, usize), usize>,
    a: HashMap<usize, usize>,
    b: HashMap<usize, usize>,
}

impl Contingency {
    fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("empty labelling".into()));
        }
        if a.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "labellings of different lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let mut c = Self {
            n: a.len() as f64,
            joint: HashMap::new(),
            a: HashMap::new(),
            b: HashMap::new(),
        };
        for (&x, &y) in a.iter().zip(b) {
            *c.joint.entry((x, y)).or_default() += 1;
            *c.a.entry(x).or_default() += 1;
            *c.b.entry(y).or_default() += 1;
        }
        Ok(c)
    }

    fn sorted(m: &HashMap<usize, usize>) -> Vec<usize> {
        let mut v: Vec<_> = m.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, c)| c).collect()
    }

    fn h_a(&self) -> f64 {
        entropy_of_counts(Self::sorted(&self.a).iter(), self.n)
    }

    fn h_b(&self) -> f64 {
        entropy_of_counts(Self::sorted(&self.b).iter(), self.n)
    }

    fn h_joint(&self) -> f64 {
        let mut v: Vec<_> = self.joint.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable();
        entropy_of_counts(v.iter().map(|(_, c)| c), self.n)
    }

    fn mutual_information(&self) -> f64 {
        (self.h_a() + self.h_b() - self.h_joint()).max(0.0)
    }
}

/// Normalised mutual information; 1 for identical partitions up to relabelling.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    let (hp, ht) = (c.h_a(), c.h_b());
    if hp == 0.0 || ht == 0.0 {
        return Ok(if hp == 0.0 && ht == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((c.mutual_information() / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// `1 − H(truth | pred) / H(truth)`: each predicted cluster holds one class.
pub fn homogeneity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    let ht = c.h_b();
    if ht == 0.0 {
        return Ok(1.0);
    }
    let h_t_given_p = c.h_joint() - c.h_a();
    Ok((1.0 - h_t_given_p / ht).clamp(0.0, 1.0))
}

/// `1 − H(pred | truth) / H(pred)`: each class lies in one predicted cluster.
pub fn completeness(pred: &[usize], truth: &[usize]) -> Result<f64> {
    homogeneity(truth, pred)
}

fn check_partition(g_n: usize, partition: &[usize]) -> Result<()> {
    if partition.len() != g_n {
        return Err(Error::InvalidArgument(format!(
            "partition has {} entries for {g_n} nodes",
            partition.len()
        )));
    }
    Ok(())
}

/// Newman–Girvan modularity for weighted undirected graphs.
pub fn modularity(g: &SparseGraph, partition: &[usize]) -> Result<f64> {
    check_partition(g.n(), partition)?;
    let k = partition.iter().max().map_or(0, |m| m + 1);
    let two_m = g.adjacency().total();
    if two_m == 0.0 {
        return Ok(0.0);
    }
    let mut inner = vec![0.0; k];
    let mut degree = vec![0.0; k];
    let a = g.adjacency();
    for i in 0..g.n() {
        for (j, w) in a.row(i) {
            degree[partition[i]] += w;
            if partition[i] == partition[j] {
                inner[partition[i]] += w;
            }
        }
    }
    Ok((0..k)
        .map(|c| inner[c] / two_m - (degree[c] / two_m).powi(2))
        .sum())
}

/// Mean over `k` clusters of `cut(S_c) / vol(S_c)` on a weighted matrix;
/// clusters with zero volume contribute 0.
pub fn mean_conductance(a: &CsrMatrix, partition: &[usize], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut cut = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for (i, &ci) in partition.iter().enumerate() {
        for (j, w) in a.row(i) {
            vol[ci] += w;
            if partition[j] != ci {
                cut[ci] += w;
            }
        }
    }
    (0..k)
        .map(|c| if vol[c] > 0.0 { cut[c] / vol[c] } else { 0.0 })
        .sum::<f64>()
        / k as f64
}

fn label_count(partition: &[usize]) -> usize {
    partition.iter().max().map_or(0, |m| m + 1)
}

/// Edge conductance averaged over clusters `0..=max label`.
pub fn conductance(g: &SparseGraph, partition: &[usize]) -> Result<f64> {
    check_partition(g.n(), partition)?;
    Ok(mean_conductance(g.adjacency(), partition, label_count(partition)))
}

/// Triangle motif conductance averaged over clusters `0..=max label`.
pub fn motif_conductance(g: &SparseGraph, partition: &[usize]) -> Result<f64> {
    check_partition(g.n(), partition)?;
    let m = triangle_adjacency(g);
    Ok(mean_conductance(&m.a_m, partition, label_count(partition)))
}

/// Fraction of clusters that win the argmax of at least one node, and the
/// entropy of the argmax histogram normalised by `ln K`.
pub fn degeneracy_report(s: &Matrix) -> (f64, f64) {
    let k = s.ncols();
    let n = s.nrows();
    if k == 0 || n == 0 {
        return (0.0, 0.0);
    }
    let mut hist = vec![0usize; k];
    for c in argmax_rows(s) {
        hist[c] += 1;
    }
    let used = hist.iter().filter(|&&c| c > 0).count();
    let entropy = if k > 1 {
        entropy_of_counts(hist.iter(), n as f64) / (k as f64).ln()
    } else {
        0.0
    };
    (used as f64 / k as f64, entropy)
}

/// All metrics for a soft assignment `s` against ground truth labels.
pub fn clustering_report(g: &SparseGraph, s: &Matrix, truth: &[usize]) -> Result<ClusteringReport> {
    check_partition(g.n(), truth)?;
    if s.nrows() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "assignment has {} rows for {} nodes",
            s.nrows(),
            g.n()
        )));
    }
    let pred = argmax_rows(s);
    let k = s.ncols();
    let (clusters_used_fraction, cluster_usage_entropy) = degeneracy_report(s);
    let m = triangle_adjacency(g);
    Ok(ClusteringReport {
        nmi: nmi(&pred, truth)?,
        completeness: completeness(&pred, truth)?,
        homogeneity: homogeneity(&pred, truth)?,
        modularity: modularity(g, &pred)?,
        conductance: mean_conductance(g.adjacency(), &pred, k),
        motif_conductance: mean_conductance(&m.a_m, &pred, k),
        cluster_usage_entropy,
        clusters_used_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::one_hot;
    use crate::motif::{motif_cut_vol, Motif};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_triangles() -> SparseGraph {
        build_graph(
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
            6,
            None,
        )
        .unwrap()
    }

    #[test]
    fn nmi_examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0; 6], &[0, 0, 0, 1, 1, 1]).unwrap(), 0.0);
        assert!((nmi(&[2, 2, 0, 0, 1, 1], &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&[], &[]).is_err());
    }

    /// Reference values from the textbook contingency formulas.
    #[test]
    fn nmi_reference_value() {
        // pred {0,0,1,1}, truth {0,0,0,1}: MI = H(truth) + H(pred) - H(joint)
        let hp = 2f64.ln();
        let ht = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let hj = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        let want = (hp + ht - hj) / (hp * ht).sqrt();
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn homogeneity_completeness_single_cluster() {
        let truth = [0, 0, 1, 1];
        assert_eq!(homogeneity(&[0; 4], &truth).unwrap(), 0.0);
        assert_eq!(completeness(&[0; 4], &truth).unwrap(), 1.0);
    }

    #[test]
    fn two_triangle_metrics() {
        let g = two_triangles();
        let p = [0, 0, 0, 1, 1, 1];
        assert_eq!(conductance(&g, &p).unwrap(), 0.0);
        assert_eq!(motif_conductance(&g, &p).unwrap(), 0.0);
        assert!((modularity(&g, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn motif_conductance_on_split_triangle() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3, None).unwrap();
        let p = [0, 1, 1];
        let stats = motif_cut_vol(&g, Motif::Triangle, &p).unwrap();
        let oracle = (0..2)
            .map(|c| stats.cut[c] as f64 / stats.vol[c] as f64)
            .sum::<f64>()
            / 2.0;
        assert_eq!(motif_conductance(&g, &p).unwrap(), oracle);
        assert_eq!(oracle, 1.0 / 1.0 * 0.5 + 1.0 / 2.0 * 0.5);
    }

    #[test]
    fn conductance_extremes() {
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((i, j, 1.0));
            }
        }
        let k5 = build_graph(&edges, 5, None).unwrap();
        assert_eq!(conductance(&k5, &[0; 5]).unwrap(), 0.0);
        assert_eq!(conductance(&k5, &[0, 1, 2, 3, 4]).unwrap(), 1.0);
    }

    #[test]
    fn degeneracy_examples() {
        let balanced = one_hot(&[0, 1, 2, 0, 1, 2], 3);
        let (f, e) = degeneracy_report(&balanced);
        assert_eq!(f, 1.0);
        assert!((e - 1.0).abs() < 1e-12);
        let (f, e) = degeneracy_report(&one_hot(&[2; 5], 4));
        assert_eq!((f, e), (0.25, 0.0));
        let (f, _) = degeneracy_report(&Matrix::from_elem((7, 5), 0.2));
        assert_eq!(f, 0.2);
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SparseGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        build_graph(&edges, n, None).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nmi_symmetric_and_relabel_invariant(
            a in proptest::collection::vec(0usize..4, 1..40),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let x = nmi(&a, &b).unwrap();
            prop_assert!((x - nmi(&b, &a).unwrap()).abs() < 1e-12);
            let relabelled: Vec<usize> = a.iter().map(|&c| 10 - c).collect();
            prop_assert!((x - nmi(&relabelled, &b).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
            let h = homogeneity(&a, &b).unwrap();
            let c = completeness(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&h) && (0.0..=1.0).contains(&c));
        }

        #[test]
        fn motif_conductance_matches_enumeration(seed in 0u64..10_000, n in 3usize..=25, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, n, 0.4);
            let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let stats = motif_cut_vol(&g, Motif::Triangle, &p).unwrap();
            let kk = stats.vol.len();
            let oracle = (0..kk)
                .map(|c| if stats.vol[c] > 0 { stats.cut[c] as f64 / stats.vol[c] as f64 } else { 0.0 })
                .sum::<f64>() / kk as f64;
            prop_assert_eq!(motif_conductance(&g, &p).unwrap(), oracle);
        }
    }
}
