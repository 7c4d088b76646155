use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stratified_split, LabeledGraphSet};
use crate::error::{Error, Result};
use crate::graph::{graph_from_edge_set, SparseGraph};
use crate::motif::{node_triangle_counts, triangle_adjacency};

/// Mutable simple graph used while generating.
#[derive(Clone, Debug)]
struct EdgeSet {
    adj: Vec<BTreeSet<usize>>,
}

impl EdgeSet {
    fn new(n: usize) -> Self {
        Self {
            adj: vec![BTreeSet::new(); n],
        }
    }

    fn has(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    fn add(&mut self, i: usize, j: usize) -> bool {
        if i == j || self.has(i, j) {
            return false;
        }
        self.adj[i].insert(j);
        self.adj[j].insert(i);
        true
    }

    fn remove(&mut self, i: usize, j: usize) {
        self.adj[i].remove(&j);
        self.adj[j].remove(&i);
    }

    fn add_triangle(&mut self, a: usize, b: usize, c: usize) {
        self.add(a, b);
        self.add(b, c);
        self.add(a, c);
    }

    fn common_neighbours(&self, i: usize, j: usize) -> usize {
        self.adj[i].intersection(&self.adj[j]).count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.adj.iter().enumerate() {
            out.extend(nb.range(i + 1..).map(|&j| (i, j)));
        }
        out
    }

    fn triangles(&self) -> usize {
        self.edges()
            .into_iter()
            .map(|(i, j)| self.adj[i].intersection(&self.adj[j]).filter(|&&k| k > j).count())
            .sum()
    }

    fn into_graph(self) -> SparseGraph {
        let n = self.adj.len();
        graph_from_edge_set(n, self.edges())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn zscore(col: &mut ndarray::ArrayViewMut1<f64>) {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    col.mapv_inplace(|x| if sd > 0.0 { (x - mean) / sd } else { x - mean });
}

/// Triangle-dense communities joined by links that close no triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Syn1Params {
    pub nodes: usize,
    pub communities: usize,
    /// Rounds of random triangle factors per community; every node gains
    /// one triangle per round.
    pub triangle_rounds: usize,
    pub inter_edges: usize,
    pub feature_dim: usize,
    /// Spacing between community means on the label-correlated feature,
    /// which is centred at zero.
    pub label_gap: f64,
    /// Standard deviation of the noise on the label-correlated feature.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for Syn1Params {
    fn default() -> Self {
        Self {
            nodes: 1000,
            communities: 3,
            triangle_rounds: 3,
            inter_edges: 8000,
            feature_dim: 10,
            label_gap: 2.0,
            label_noise: 0.2,
            seed: 0,
        }
    }
}

pub fn gen_syn1(p: &Syn1Params) -> Result<SparseGraph> {
    if p.communities < 2 || p.nodes < 3 * p.communities || p.feature_dim == 0 || p.triangle_rounds == 0 {
        return Err(Error::InvalidArgument(format!("invalid syn1 parameters {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.nodes;
    let k = p.communities;
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let mut es = EdgeSet::new(n);

    for c in 0..k {
        let mut order: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        // each round splits the community into disjoint triangles; leftover
        // nodes join a triangle with two random members
        for _ in 0..p.triangle_rounds {
            order.shuffle(&mut rng);
            let full = order.len() / 3 * 3;
            for t in order[..full].chunks(3) {
                es.add_triangle(t[0], t[1], t[2]);
            }
            for &v in &order[full..] {
                let others: Vec<usize> = order[..full].choose_multiple(&mut rng, 2).copied().collect();
                es.add_triangle(v, others[0], others[1]);
            }
        }
    }

    let mut placed = 0;
    let budget = 200 * p.inter_edges.max(1);
    for _ in 0..budget {
        if placed == p.inter_edges {
            break;
        }
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if labels[i] == labels[j] || es.has(i, j) || es.common_neighbours(i, j) > 0 {
            continue;
        }
        es.add(i, j);
        placed += 1;
    }
    if placed < p.inter_edges {
        return Err(Error::Generator(format!(
            "placed {placed} of {} triangle-free inter-community edges",
            p.inter_edges
        )));
    }

    let mut x = gaussian_matrix(&mut rng, n, p.feature_dim);
    let noise = Normal::new(0.0, p.label_noise).map_err(|e| Error::Generator(e.to_string()))?;
    let last = p.feature_dim - 1;
    for i in 0..n {
        x[[i, last]] = p.label_gap * (labels[i] as f64 - (k - 1) as f64 / 2.0) + noise.sample(&mut rng);
    }
    es.into_graph().with_features(x)?.with_node_labels(labels)
}

/// Erdős–Rényi graph labelled by triangle membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Syn2Params {
    pub nodes: usize,
    pub p: f64,
    pub seed: u64,
}

impl Default for Syn2Params {
    fn default() -> Self {
        Self {
            nodes: 1000,
            p: 0.012,
            seed: 0,
        }
    }
}

/// Number of structural feature columns produced for syn2.
pub const SYN2_FEATURES: usize = 3;

/// Features, each z-scored: triangle count, clustering coefficient and the
/// number of nodes within two hops.
pub fn gen_syn2(p: &Syn2Params) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p.p) || p.nodes < 3 {
        return Err(Error::InvalidArgument(format!("invalid syn2 parameters {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.nodes;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p.p) {
                edges.push((i, j));
            }
        }
    }
    let g = graph_from_edge_set(n, edges);
    let tri = node_triangle_counts(&triangle_adjacency(&g));
    let labels: Vec<usize> = tri.iter().map(|&t| usize::from(t > 0)).collect();
    let mut x = Array2::zeros((n, SYN2_FEATURES));
    for i in 0..n {
        let d = g.adjacency().row_nnz(i) as f64;
        let mut reach: BTreeSet<usize> = BTreeSet::new();
        for j in g.neighbors(i) {
            reach.insert(j);
            reach.extend(g.neighbors(j));
        }
        reach.remove(&i);
        x[[i, 0]] = tri[i] as f64;
        x[[i, 1]] = if d >= 2.0 { 2.0 * tri[i] as f64 / (d * (d - 1.0)) } else { 0.0 };
        x[[i, 2]] = reach.len() as f64;
    }
    for mut col in x.axis_iter_mut(Axis(1)) {
        zscore(&mut col);
    }
    g.with_features(x)?.with_node_labels(labels)
}

/// Erdős–Rényi `G(n, p)` without features or labels.
pub fn gen_gnp(n: usize, p: f64, seed: u64) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Generator(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Ok(graph_from_edge_set(n, edges))
}

/// Gaussian random partition graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Syn3Params {
    pub nodes: usize,
    pub partitions: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Partition sizes have variance `mean / size_shape`.
    pub size_shape: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for Syn3Params {
    fn default() -> Self {
        Self {
            nodes: 500,
            partitions: 5,
            p_in: 0.8,
            p_out: 0.2,
            size_shape: 10.0,
            feature_dim: 10,
            seed: 0,
        }
    }
}

pub fn gen_syn3(p: &Syn3Params) -> Result<SparseGraph> {
    let (n, k) = (p.nodes, p.partitions);
    if k < 2 || n < 2 * k {
        return Err(Error::InvalidArgument(format!("invalid syn3 parameters {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mean = n as f64 / k as f64;
    let normal = Normal::new(mean, (mean / p.size_shape).sqrt())
        .map_err(|e| Error::Generator(e.to_string()))?;
    let mut sizes = Vec::new();
    for _ in 0..100 {
        sizes = (0..k - 1)
            .map(|_| normal.sample(&mut rng).round().max(2.0) as usize)
            .collect();
        let used: usize = sizes.iter().sum();
        if used + 2 <= n {
            sizes.push(n - used);
            break;
        }
        sizes.clear();
    }
    if sizes.is_empty() {
        return Err(Error::Generator("could not draw partition sizes".into()));
    }
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] { p.p_in } else { p.p_out };
            if rng.random_bool(prob) {
                edges.push((i, j));
            }
        }
    }
    let x = gaussian_matrix(&mut rng, n, p.feature_dim);
    graph_from_edge_set(n, edges).with_features(x)?.with_node_labels(labels)
}

/// Graph classification set: triangle-rich (class 0) versus triangle-free
/// graphs with the same degree sequences (class 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcParams {
    pub graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_community: usize,
    pub max_community: usize,
    pub p_in: f64,
    /// Extra random links between communities, per node.
    pub inter_per_node: f64,
    pub seed: u64,
}

impl Default for GcParams {
    fn default() -> Self {
        Self {
            graphs: 100,
            min_nodes: 20,
            max_nodes: 40,
            min_community: 3,
            max_community: 12,
            p_in: 1.0,
            inter_per_node: 0.1,
            seed: 0,
        }
    }
}

fn planted_communities(p: &GcParams, n: usize, rng: &mut ChaCha8Rng) -> EdgeSet {
    let mut es = EdgeSet::new(n);
    let mut starts = vec![0];
    while *starts.last().unwrap() < n {
        let size = rng.random_range(p.min_community..=p.max_community);
        starts.push((starts.last().unwrap() + size).min(n));
    }
    let blocks: Vec<(usize, usize)> = starts.windows(2).map(|w| (w[0], w[1])).collect();
    for &(s, e) in &blocks {
        for i in s..e {
            for j in i + 1..e {
                if rng.random_bool(p.p_in) {
                    es.add(i, j);
                }
            }
        }
    }
    // chain consecutive communities so the graph is connected
    for w in blocks.windows(2) {
        let a = rng.random_range(w[0].0..w[0].1);
        let b = rng.random_range(w[1].0..w[1].1);
        es.add(a, b);
    }
    let block_of = |i: usize| blocks.iter().position(|&(s, e)| i >= s && i < e).unwrap();
    let extra = (p.inter_per_node * n as f64).round() as usize;
    let mut placed = 0;
    for _ in 0..100 * extra.max(1) {
        if placed == extra {
            break;
        }
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if block_of(i) != block_of(j) && es.add(i, j) {
            placed += 1;
        }
    }
    es
}

/// Degree-preserving double edge swaps that never increase the triangle
/// count, until none remain.
fn rewire_triangle_free(es: &mut EdgeSet, rng: &mut ChaCha8Rng) -> bool {
    let mut tri = es.triangles();
    let mut steps = 0;
    while tri > 0 && steps < 20_000 {
        steps += 1;
        let edges = es.edges();
        let in_tri: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| es.common_neighbours(a, b) > 0)
            .collect();
        let (a, b) = *in_tri.choose(rng).expect("triangle edges exist");
        let (mut c, mut d) = *edges.choose(rng).expect("edges exist");
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        if [c, d].contains(&a) || [c, d].contains(&b) || es.has(a, d) || es.has(c, b) {
            continue;
        }
        es.remove(a, b);
        es.remove(c, d);
        es.add(a, d);
        es.add(c, b);
        let next = es.triangles();
        if next <= tri {
            tri = next;
        } else {
            es.remove(a, d);
            es.remove(c, b);
            es.add(a, b);
            es.add(c, d);
        }
    }
    tri == 0
}

pub fn gen_gc_synthetic(p: &GcParams) -> Result<LabeledGraphSet> {
    if p.graphs < 20
        || p.min_nodes > p.max_nodes
        || p.min_community < 3
        || p.min_community > p.max_community
        || p.min_nodes < p.max_community
    {
        return Err(Error::InvalidArgument(format!("invalid gc parameters {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut graphs = Vec::with_capacity(p.graphs);
    for idx in 0..p.graphs {
        let label = idx % 2;
        let mut made = None;
        for _ in 0..50 {
            let n = rng.random_range(p.min_nodes..=p.max_nodes);
            let mut es = planted_communities(p, n, &mut rng);
            if label == 0 {
                if es.triangles() * 10 >= n {
                    made = Some(es);
                    break;
                }
            } else if rewire_triangle_free(&mut es, &mut rng) {
                made = Some(es);
                break;
            }
        }
        let es = made.ok_or_else(|| Error::Generator(format!("graph {idx} failed after 50 attempts")))?;
        let n = es.adj.len();
        let mut g = es.into_graph().with_features(Array2::ones((n, 1)))?;
        g.graph_label = Some(label);
        graphs.push(g);
    }
    let labels: Vec<usize> = graphs.iter().map(|g| g.graph_label.unwrap()).collect();
    Ok(LabeledGraphSet {
        split: stratified_split(&labels, p.seed ^ 0x5eed),
        graphs,
        num_classes: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::{enumerate_instances, triangle_count, Motif};

    #[test]
    fn gnp_extremes() {
        assert_eq!(gen_gnp(12, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(gen_gnp(12, 1.0, 1).unwrap().edge_count(), 66);
        assert!(gen_gnp(12, 1.5, 1).is_err());
        let a = gen_gnp(30, 0.3, 4).unwrap();
        let b = gen_gnp(30, 0.3, 4).unwrap();
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
    }

    fn small_syn1(seed: u64) -> Syn1Params {
        Syn1Params {
            nodes: 90,
            communities: 3,
            triangle_rounds: 3,
            inter_edges: 200,
            seed,
            ..Syn1Params::default()
        }
    }

    #[test]
    fn syn1_inter_edges_close_no_triangle() {
        for seed in 0..5 {
            let g = gen_syn1(&small_syn1(seed)).unwrap();
            let labels = g.node_labels.clone().unwrap();
            let mut inter = 0;
            for (i, j, _) in g.edges() {
                if labels[i] != labels[j] {
                    inter += 1;
                    assert!(g.neighbors(i).all(|k| !g.has_edge(j, k)), "edge {i}-{j}");
                }
            }
            assert_eq!(inter, 200);
            let tris = enumerate_instances(&g, Motif::Triangle).unwrap();
            assert!(!tris.is_empty());
            for t in tris {
                assert!(labels[t[0]] == labels[t[1]] && labels[t[1]] == labels[t[2]]);
            }
            let counts = node_triangle_counts(&triangle_adjacency(&g));
            assert!(counts.iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn syn1_default_scale() {
        let g = gen_syn1(&Syn1Params::default()).unwrap();
        assert_eq!(g.n(), 1000);
        assert_eq!(g.features.as_ref().unwrap().ncols(), 10);
    }

    #[test]
    fn syn2_labels_match_enumeration() {
        let p = Syn2Params {
            nodes: 150,
            p: 0.05,
            ..Syn2Params::default()
        };
        let g = gen_syn2(&p).unwrap();
        let mut member = vec![0usize; g.n()];
        for t in enumerate_instances(&g, Motif::Triangle).unwrap() {
            for v in t {
                member[v] = 1;
            }
        }
        assert_eq!(g.node_labels.unwrap(), member);
    }

    #[test]
    fn syn2_edge_count_in_range() {
        let g = gen_syn2(&Syn2Params::default()).unwrap();
        assert_eq!(g.n(), 1000);
        assert!((5000..=7000).contains(&g.edge_count()), "{}", g.edge_count());
        assert_eq!(g.features.unwrap().ncols(), SYN2_FEATURES);
    }

    #[test]
    fn syn3_shape_and_density() {
        let g = gen_syn3(&Syn3Params::default()).unwrap();
        assert_eq!(g.n(), 500);
        let labels = g.node_labels.clone().unwrap();
        let k = 5;
        let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        let intra_pairs: usize = sizes.iter().map(|s| s * (s - 1) / 2).sum();
        let inter_pairs = 500 * 499 / 2 - intra_pairs;
        let (mut intra, mut inter) = (0, 0);
        for (i, j, _) in g.edges() {
            if labels[i] == labels[j] {
                intra += 1;
            } else {
                inter += 1;
            }
        }
        assert!(intra as f64 / intra_pairs as f64 > inter as f64 / inter_pairs as f64);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_syn1(&small_syn1(3)).unwrap();
        let b = gen_syn1(&small_syn1(3)).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
        assert_eq!(a.features, b.features);
        let a = gen_syn3(&Syn3Params::default()).unwrap();
        let b = gen_syn3(&Syn3Params::default()).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
    }

    #[test]
    fn gc_classes_by_construction() {
        let set = gen_gc_synthetic(&GcParams::default()).unwrap();
        assert_eq!(set.graphs.len(), 100);
        for g in &set.graphs {
            let t = triangle_count(g);
            match g.graph_label.unwrap() {
                0 => assert!(t * 10 >= g.n()),
                _ => assert_eq!(t, 0),
            }
            assert_eq!(g.features.as_ref().unwrap(), Array2::<f64>::ones((g.n(), 1)));
        }
        let s = &set.split;
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
    }
}
