//! Spectral clustering on edges (SC) and on triangle motifs (MSC).

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{sym_normalize_matrix, CsrMatrix, SparseGraph};
use crate::motif::triangle_adjacency;

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 100;

/// Eigenvectors of `L_sym = I − D^{-1/2} A D^{-1/2}` for the `k` smallest eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralEmbedding {
    pub vectors: Array2<f64>,
    pub values: Vec<f64>,
}

pub fn spectral_embedding(a: &CsrMatrix, k: usize) -> Result<SpectralEmbedding> {
    let n = a.shape().0;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let norm = sym_normalize_matrix(a).0;
    let mut lap = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for (j, v) in norm.row(i) {
            lap[(i, j)] -= v;
        }
    }
    let eig = SymmetricEigen::try_new(lap, 1e-12, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    order.truncate(k);
    if order.iter().any(|&c| !eig.eigenvalues[c].is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let vectors = Array2::from_shape_fn((n, k), |(i, c)| eig.eigenvectors[(i, order[c])]);
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    Ok(SpectralEmbedding { vectors, values })
}

fn row_normalize(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of a k-means fit.
#[derive(Clone, Debug)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

impl KMeans {
    pub fn predict(&self, x: ndarray::ArrayView1<f64>) -> usize {
        nearest(&self.centroids, x).0
    }
}

fn nearest(centroids: &Array2<f64>, x: ndarray::ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    centroids.row_mut(0).assign(&x.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(x: &Array2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeans {
    let (n, k) = (x.nrows(), centroids.nrows());
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let c = nearest(&centroids, x.row(i)).0;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(labels[i]).scaled_add(1.0, &x.row(i));
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // re-seed an empty cluster at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(x.row(a), centroids.row(labels[a]));
                        let db = sq_dist(x.row(b), centroids.row(labels[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty data");
                centroids.row_mut(c).assign(&x.row(far));
                labels[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(x.row(i), centroids.row(labels[i]))).sum();
    KMeans {
        labels,
        centroids,
        inertia,
    }
}

/// k-means++ seeding followed by Lloyd iterations; the run with the lowest
/// inertia over `restarts` is kept.
pub fn kmeans(x: &Array2<f64>, k: usize, seed: u64, restarts: usize, max_iter: usize) -> Result<KMeans> {
    if k == 0 || k > x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={}",
            x.nrows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let init = kmeans_pp_init(x, k, &mut rng);
        let fit = lloyd(x, init, max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn cluster_matrix(a: &CsrMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = a.shape().0;
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!(
            "spectral clustering needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let active: Vec<usize> = (0..n).filter(|&i| a.row_nnz(i) > 0).collect();
    if active.len() < k {
        return Err(Error::InvalidArgument(format!(
            "only {} non-isolated nodes for k={k}",
            active.len()
        )));
    }
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in active.iter().enumerate() {
        pos[i] = p;
    }
    let sub = CsrMatrix::from_triplets(
        active.len(),
        active.len(),
        active
            .iter()
            .flat_map(|&i| a.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (pos[i], pos[j], v))
            .collect::<Vec<_>>(),
    );
    let mut emb = spectral_embedding(&sub, k)?.vectors;
    row_normalize(&mut emb);
    let fit = kmeans(&emb, k, seed, KMEANS_RESTARTS, KMEANS_MAX_ITER)?;
    // isolated nodes have a zero embedding row
    let zero = ndarray::Array1::<f64>::zeros(k);
    let fallback = fit.predict(zero.view());
    Ok((0..n)
        .map(|i| if pos[i] == usize::MAX { fallback } else { fit.labels[pos[i]] })
        .collect())
}

/// Normalised spectral clustering of the graph's adjacency.
///
/// Isolated nodes are left out of the eigenproblem and placed in the
/// cluster whose centroid is nearest to the origin.
pub fn spectral_cluster(g: &SparseGraph, k: usize, seed: u64) -> Result<Vec<usize>> {
    cluster_matrix(g.adjacency(), k, seed)
}

/// Spectral clustering of the count-weighted triangle motif adjacency.
pub fn motif_spectral_cluster(g: &SparseGraph, k: usize, seed: u64) -> Result<Vec<usize>> {
    let m = triangle_adjacency(g);
    if m.is_zero() {
        return Err(Error::ZeroMotifAdjacency);
    }
    cluster_matrix(&m.a_m, k, seed)
}
