//! Sparse undirected graphs in CSR form.
//!
//! Every [`SparseGraph`] is symmetric, loop-free and keeps its column indices
//! sorted within each row, so two graphs built from the same edge list are
//! bit-identical regardless of input order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros are kept out of the structure.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_rows];
        for (i, j, v) in triplets {
            debug_assert!(i < n_rows && j < n_cols);
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Sparse view of a dense matrix (exact zeros dropped).
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let (r, c) = m.dim();
        Self::from_triplets(
            r,
            c,
            m.indexed_iter()
                .filter(|(_, v)| **v != 0.0)
                .map(|((i, j), v)| (i, j, *v)),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    /// Entry `(i, j)`, zero when structurally absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self * rhs` for a dense right operand.
    pub fn mul_dense(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, rhs.nrows());
        let mut out = Array2::zeros((self.n_rows, rhs.ncols()));
        for i in 0..self.n_rows {
            let mut out_row = out.row_mut(i);
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &rhs.row(j));
            }
        }
        out
    }

    /// `selfᵀ * rhs` without materialising the transpose.
    pub fn transpose_mul_dense(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, rhs.nrows());
        let mut out = Array2::zeros((self.n_cols, rhs.ncols()));
        for i in 0..self.n_rows {
            let src = rhs.row(i);
            for (j, v) in self.row(i) {
                out.row_mut(j).scaled_add(v, &src);
            }
        }
        out
    }

    /// Same sparsity pattern with every stored value replaced by one.
    pub fn binarized(&self) -> Self {
        Self {
            values: vec![1.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

/// Weighted node degrees, `d_i = Σ_j a_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `D^{-1/2} A D^{-1/2}` stored in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(pub CsrMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }
}

/// Undirected graph with optional node features and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    adjacency: CsrMatrix,
    pub features: Option<Array2<f64>>,
    pub node_labels: Option<Vec<usize>>,
    pub graph_label: Option<usize>,
}

impl SparseGraph {
    pub fn n(&self) -> usize {
        self.adjacency.n_rows
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn total_weight(&self) -> f64 {
        self.adjacency.total() / 2.0
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(i).map(|(j, _)| j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i, j) != 0.0
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.adjacency
                .row(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.n() {
            return Err(Error::ShapeMismatch {
                op: "features",
                left: (self.n(), 0),
                right: features.dim(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }
}

/// Builds a graph from an undirected edge list.
///
/// Self-loops are dropped; repeated edges (in either orientation) are merged
/// by summing their weights.
pub fn build_graph(
    edges: &[(usize, usize, f64)],
    n: usize,
    features: Option<Array2<f64>>,
) -> Result<SparseGraph> {
    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for &(i, j, w) in edges {
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        if w < 0.0 || w.is_nan() {
            return Err(Error::NegativeWeight { i, j, weight: w });
        }
        if i == j {
            continue;
        }
        triplets.push((i, j, w));
        triplets.push((j, i, w));
    }
    let graph = SparseGraph {
        adjacency: CsrMatrix::from_triplets(n, n, triplets),
        features: None,
        node_labels: None,
        graph_label: None,
    };
    match features {
        Some(x) => graph.with_features(x),
        None => Ok(graph),
    }
}

/// Builds a graph from unit-weight edges given as a set (no weight summing).
pub(crate) fn graph_from_edge_set(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> SparseGraph {
    let mut triplets = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, j) in edges {
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            triplets.push((key.0, key.1, 1.0));
            triplets.push((key.1, key.0, 1.0));
        }
    }
    SparseGraph {
        adjacency: CsrMatrix::from_triplets(n, n, triplets),
        features: None,
        node_labels: None,
        graph_label: None,
    }
}

pub fn degrees(g: &SparseGraph) -> DegreeVector {
    DegreeVector(g.adjacency.row_sums())
}

/// `x^{-1/2}` with the convention `0^{-1/2} = 0`.
pub(crate) fn inv_sqrt_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.sqrt()
    } else {
        0.0
    }
}

/// Symmetric normalisation of an arbitrary symmetric CSR matrix.
pub fn sym_normalize_matrix(a: &CsrMatrix) -> NormalizedAdjacency {
    let r: Vec<f64> = a.row_sums().into_iter().map(inv_sqrt_or_zero).collect();
    let mut out = a.clone();
    for i in 0..a.n_rows {
        for k in a.indptr[i]..a.indptr[i + 1] {
            let j = a.indices[k];
            out.values[k] = a.values[k] * r[i] * r[j];
        }
    }
    NormalizedAdjacency(out)
}

pub fn sym_normalize(g: &SparseGraph) -> NormalizedAdjacency {
    sym_normalize_matrix(&g.adjacency)
}

/// Parses the `i j [weight]` edge-list text format (`#` starts a comment).
///
/// When `n` is `None` the node count is one past the largest index seen.
pub fn read_edge_list(path: &Path, n: Option<usize>) -> Result<SparseGraph> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    let mut max_index = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(format!("expected `i j [weight]`, got `{line}`")));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("bad node index: {e}")))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(format!("bad node index: {e}")))?;
        let w: f64 = match fields.get(2) {
            Some(s) => s.parse().map_err(|e| parse_err(format!("bad weight: {e}")))?,
            None => 1.0,
        };
        max_index = Some(max_index.map_or(i.max(j), |m| m.max(i).max(j)));
        edges.push((i, j, w));
    }
    let n = n.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
    build_graph(&edges, n, None)
}

pub fn write_edge_list(g: &SparseGraph, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "# nodes {}", g.n())?;
    for (i, j, w) in g.edges() {
        if w == 1.0 {
            writeln!(out, "{i} {j}")?;
        } else {
            writeln!(out, "{i} {j} {w}")?;
        }
    }
    Ok(())
}

/// Reads the optional `# nodes N` header written by [`write_edge_list`].
pub fn edge_list_node_count(path: &Path) -> Result<Option<usize>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# nodes "))
        .and_then(|s| s.trim().parse().ok()))
}

/// Reads a dense CSV matrix, one row per node.
pub fn read_features_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_features_csv(x: &Array2<f64>, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads one non-negative integer label per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(lineno, l)| {
            l.trim().parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for l in labels {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn k3() -> SparseGraph {
        build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3, None).unwrap()
    }

    #[test]
    fn path_graph_degrees() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0)], 3, None).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(degrees(&g).0, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = build_graph(&[(0, 1, 1.0), (1, 0, 1.0)], 2, None).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.adjacency().get(0, 1), 2.0);
    }

    #[test]
    fn self_loop_dropped() {
        let g = build_graph(&[(0, 0, 1.0)], 1, None).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_graph(&[(0, 3, 1.0)], 3, None),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, -1.0)], 3, None),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&k3()).0, vec![2.0; 3]);
        let empty = build_graph(&[], 4, None).unwrap();
        assert_eq!(degrees(&empty).0, vec![0.0; 4]);
    }

    #[test]
    fn normalisation_examples() {
        let k2 = build_graph(&[(0, 1, 1.0)], 2, None).unwrap();
        let n = sym_normalize(&k2);
        assert_eq!(n.matrix().get(0, 1), 1.0);
        assert_eq!(n.matrix().get(1, 0), 1.0);

        let n3 = sym_normalize(&k3());
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert!((n3.matrix().get(i, j) - expected).abs() < 1e-15);
            }
        }

        let iso = build_graph(&[(0, 1, 1.0)], 3, None).unwrap();
        let n = sym_normalize(&iso);
        assert_eq!(n.matrix().row_nnz(2), 0);
    }

    #[test]
    fn spectral_radius_at_most_one() {
        let g = build_graph(
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5), (0, 2, 1.0)],
            5,
            None,
        )
        .unwrap();
        let dense = sym_normalize(&g).matrix().to_dense();
        let m = nalgebra::DMatrix::from_fn(5, 5, |i, j| dense[[i, j]]);
        let eig = m.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|l| l.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn edge_list_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "# comment\n0 1\n1 2 2.5\n\n3 3\n").unwrap();
        let g = read_edge_list(&path, None).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.adjacency().get(1, 2), 2.5);
        let out = dir.path().join("out.txt");
        write_edge_list(&g, &out).unwrap();
        let n = edge_list_node_count(&out).unwrap();
        assert_eq!(read_edge_list(&out, n).unwrap(), g);
    }

    #[test]
    fn features_and_labels_files() {
        let dir = tempfile::tempdir().unwrap();
        let x = array![[1.0, 2.5], [-0.125, 3.0]];
        write_features_csv(&x, &dir.path().join("x.csv")).unwrap();
        assert_eq!(read_features_csv(&dir.path().join("x.csv")).unwrap(), x);
        write_labels(&[0, 2, 1], &dir.path().join("y.txt")).unwrap();
        assert_eq!(read_labels(&dir.path().join("y.txt")).unwrap(), vec![0, 2, 1]);
    }

    fn random_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2usize..50).prop_flat_map(|n| {
            let edge = (0..n, 0..n, 0.0f64..3.0);
            (Just(n), prop::collection::vec(edge, 0..120))
        })
    }

    proptest! {
        #[test]
        fn constructed_graphs_satisfy_invariants((n, edges) in random_edges()) {
            let g = build_graph(&edges, n, None).unwrap();
            let a = g.adjacency();
            prop_assert!(a.is_symmetric());
            for i in 0..n {
                prop_assert_eq!(a.get(i, i), 0.0);
                let cols: Vec<usize> = a.row(i).map(|(j, _)| j).collect();
                prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            }
            let d = degrees(&g);
            prop_assert!((d.total() - 2.0 * g.total_weight()).abs() < 1e-9);
        }

        #[test]
        fn normalisation_matches_dense_oracle((n, edges) in random_edges()) {
            let g = build_graph(&edges, n, None).unwrap();
            let a = g.adjacency().to_dense();
            let d: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
            let got = sym_normalize(&g).matrix().to_dense();
            for i in 0..n {
                for j in 0..n {
                    let expected = if d[i] > 0.0 && d[j] > 0.0 {
                        a[[i, j]] / (d[i] * d[j]).sqrt()
                    } else {
                        0.0
                    };
                    prop_assert!((got[[i, j]] - expected).abs() <= 1e-12);
                }
            }
        }
    }
}
