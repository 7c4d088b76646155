//! Unsupervised node clustering: GCN-skip, then an MLP producing `S`.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Mode, Pooler};
use super::{fit, EpochEval, RunRecord};
use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{sym_normalize, CsrMatrix, SparseGraph};
use crate::loss::{
    alpha_at, loss_mc, loss_mincut_ablation, loss_ortho, total_loss, MotifOperator,
};
use crate::metrics::clustering_report;
use crate::model::{
    argmax_rows, assignment_forward, gcn_skip_forward, GcnSkipParams, MlpParams, ParamSet, Propagation,
};
use crate::motif::{edge_adjacency, triangle_adjacency, triangle_adjacency_of};
use crate::pooling::{cluster_count, coarsen, random_assignment};

/// Constant operands derived once from a graph and shared across seeds.
#[derive(Clone, Debug)]
pub struct ClusterInputs {
    pub graph: SparseGraph,
    pub x: Matrix,
    pub truth: Vec<usize>,
    /// Number of final clusters.
    pub k: usize,
    /// Raw adjacency, used for coarsening.
    pub adj: Arc<CsrMatrix>,
    /// Normalised adjacency, used for message passing.
    pub adj_norm: Arc<CsrMatrix>,
    pub deg_norm: Arc<CsrMatrix>,
    pub edge: MotifOperator,
    pub tri: MotifOperator,
}

impl ClusterInputs {
    pub fn new(g: &SparseGraph, cfg: &ExperimentConfig) -> Result<Self> {
        let x = g
            .features
            .clone()
            .ok_or_else(|| Error::InvalidArgument("clustering needs node features".into()))?;
        let truth = g
            .node_labels
            .clone()
            .ok_or_else(|| Error::InvalidArgument("clustering needs node labels".into()))?;
        let classes = truth.iter().max().map_or(0, |m| m + 1);
        let k = cfg.clusters.unwrap_or(classes);
        if k < 2 || k > g.n() {
            return Err(Error::InvalidArgument(format!(
                "cannot form {k} clusters on {} nodes",
                g.n()
            )));
        }
        let adj_norm = sym_normalize(g).0;
        let deg_norm = CsrMatrix::diagonal(&adj_norm.row_sums());
        Ok(Self {
            graph: g.clone(),
            x,
            truth,
            k,
            adj: Arc::new(g.adjacency().clone()),
            adj_norm: Arc::new(adj_norm),
            deg_norm: Arc::new(deg_norm),
            edge: MotifOperator::new(&edge_adjacency(g)),
            tri: MotifOperator::new(&triangle_adjacency(g)),
        })
    }
}

/// Tape values of one clustering loss.
struct LossParts {
    l_mc: Var,
    l_o: Option<Var>,
    /// `l_mc` re-weighted with the schedule's final weights, so that values
    /// from different epochs compare on the same scale.
    settled_mc: f64,
}

/// The pooler's clustering objective for `s` on a graph with the given operators.
fn cluster_loss(
    tape: &mut Tape,
    s: Var,
    edge: &MotifOperator,
    tri: &MotifOperator,
    mincut: Option<(&Arc<CsrMatrix>, &Arc<CsrMatrix>)>,
    cfg: &ExperimentConfig,
    epoch: usize,
) -> Result<LossParts> {
    let mut settled = None;
    let l_mc = match cfg.pooler {
        Pooler::Hosc => {
            let schedule = cfg.alpha_schedule();
            let (a1, a2) = alpha_at(&schedule, epoch);
            let l_edge = loss_mc(tape, s, edge)?;
            let l_tri = loss_mc(tape, s, tri)?;
            let (f1, f2) = alpha_at(&schedule, usize::MAX);
            settled = Some(f1 * tape.scalar(l_edge) + f2 * tape.scalar(l_tri));
            let we = tape.scale(l_edge, a1)?;
            let wt = tape.scale(l_tri, a2)?;
            tape.add(we, wt)?
        }
        Pooler::Hp1 => loss_mc(tape, s, edge)?,
        Pooler::Hp2 => loss_mc(tape, s, tri)?,
        Pooler::MinCutLoss => match mincut {
            Some((a, d)) => loss_mincut_ablation(tape, s, a, d)?,
            None => {
                let a = Arc::new(sym_normalize_csr(&edge.a));
                let d = Arc::new(CsrMatrix::diagonal(&a.row_sums()));
                loss_mincut_ablation(tape, s, &a, &d)?
            }
        },
        Pooler::Random | Pooler::NoPool => tape.scalar_constant(0.0),
    };
    let l_o = if cfg.mu > 0.0 { Some(loss_ortho(tape, s)?) } else { None };
    let settled_mc = settled.unwrap_or_else(|| tape.scalar(l_mc));
    Ok(LossParts { l_mc, l_o, settled_mc })
}

fn sym_normalize_csr(a: &CsrMatrix) -> CsrMatrix {
    crate::graph::sym_normalize_matrix(a).0
}

/// Operators of a coarsened graph: its weighted edges and the triangle
/// pattern of the entries above `threshold`. Both are constants.
pub(crate) fn pooled_operators(adj_pool: &Matrix, threshold: f64) -> (MotifOperator, MotifOperator) {
    let mut a = adj_pool.clone();
    for ((i, j), v) in a.indexed_iter_mut() {
        if i == j || *v <= threshold {
            *v = 0.0;
        }
    }
    let csr = CsrMatrix::from_dense(&a);
    let tri = triangle_adjacency_of(&csr);
    (MotifOperator::from_matrix(csr), MotifOperator::from_matrix(tri))
}

struct OneBlock {
    gcn: GcnSkipParams,
    mlp: MlpParams,
}

fn one_block_forward(tape: &mut Tape, inputs: &ClusterInputs, m: &OneBlock, vars: &[Var]) -> Result<Var> {
    let x = tape.constant(inputs.x.clone());
    let h = gcn_skip_forward(tape, Propagation::Sparse(&inputs.adj_norm), x, &m.gcn, vars)?;
    assignment_forward(tape, h, &m.mlp, vars)
}

fn finish(
    inputs: &ClusterInputs,
    cfg: &ExperimentConfig,
    seed: u64,
    s: &Matrix,
    trace: Vec<super::EpochTrace>,
    best_epoch: usize,
    started: Instant,
) -> Result<RunRecord> {
    let report = clustering_report(&inputs.graph, s, &inputs.truth)?;
    Ok(RunRecord {
        config_hash: cfg.hash(),
        seed,
        mode: cfg.mode,
        pooler: cfg.pooler,
        epochs_run: trace.len(),
        best_epoch,
        trace,
        report: Some(report),
        val_accuracy: None,
        test_accuracy: None,
        assignment: Some(argmax_rows(s)),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Trains one GCN-skip layer and an assignment MLP on a single graph.
pub fn run_clustering(inputs: &ClusterInputs, cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let started = Instant::now();
    let n = inputs.graph.n();
    if cfg.pooler == Pooler::Random {
        let s = random_assignment(n, inputs.k, seed)?;
        return finish(inputs, cfg, seed, &s, Vec::new(), 0, started);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let f = inputs.x.ncols();
    let model = OneBlock {
        gcn: GcnSkipParams::init(&mut params, "gcn", f, cfg.hidden, &mut rng),
        mlp: MlpParams::init(&mut params, "mlp", &[cfg.hidden, cfg.mlp_hidden, inputs.k], &mut rng)?,
    };
    let mincut = (&inputs.adj_norm, &inputs.deg_norm);
    let outcome = fit(&mut params, cfg, |params, _, epoch| {
        let mut tape = Tape::new();
        let vars = params.attach(&mut tape);
        let s = one_block_forward(&mut tape, inputs, &model, &vars)?;
        let parts = cluster_loss(&mut tape, s, &inputs.edge, &inputs.tri, Some(mincut), cfg, epoch)?;
        let total = total_loss(&mut tape, parts.l_mc, parts.l_o, None, cfg.mu)?;
        let l_mc = tape.scalar(parts.l_mc);
        let l_o = parts.l_o.map_or(0.0, |v| tape.scalar(v));
        let total_v = tape.scalar(total);
        let grads = tape.backward(total)?;
        Ok(EpochEval {
            grads: Some(vars.iter().map(|&v| grads.wrt(v)).collect()),
            l_mc,
            l_o,
            l_sup: 0.0,
            total: total_v,
            val_accuracy: None,
            score: (-(parts.settled_mc + cfg.mu * l_o), 0.0),
        })
    })?;
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let s = one_block_forward(&mut tape, inputs, &model, &vars)?;
    finish(inputs, cfg, seed, tape.value(s), outcome.trace, outcome.best_epoch, started)
}

struct TwoBlocks {
    first: OneBlock,
    gcn2: GcnSkipParams,
    mlp2: MlpParams,
}

/// Values recorded while running both blocks.
struct TwoBlockPass {
    s1: Var,
    s2: Var,
    composite: Var,
    adj_pool: Var,
}

fn two_block_forward(
    tape: &mut Tape,
    inputs: &ClusterInputs,
    m: &TwoBlocks,
    vars: &[Var],
) -> Result<TwoBlockPass> {
    let x = tape.constant(inputs.x.clone());
    let h1 = gcn_skip_forward(tape, Propagation::Sparse(&inputs.adj_norm), x, &m.first.gcn, vars)?;
    let s1 = assignment_forward(tape, h1, &m.first.mlp, vars)?;
    let pooled = coarsen(tape, Propagation::Sparse(&inputs.adj), h1, s1)?;
    let h2 = gcn_skip_forward(tape, Propagation::Dense(pooled.adj_pool), pooled.x_pool, &m.gcn2, vars)?;
    let s2 = assignment_forward(tape, h2, &m.mlp2, vars)?;
    let composite = tape.matmul(s1, s2)?;
    Ok(TwoBlockPass {
        s1,
        s2,
        composite,
        adj_pool: pooled.adj_pool,
    })
}

/// MP–Pool–MP–Pool: the first block pools to `cluster_count(N, ratio)`
/// clusters, the second to the final `K`; nodes are assigned through
/// `S1·S2`. The loss is the mean of both blocks' losses.
pub fn run_clustering_2layer(inputs: &ClusterInputs, cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let started = Instant::now();
    let n = inputs.graph.n();
    let k1 = cluster_count(n, cfg.pool_ratio);
    if k1 < inputs.k.max(2) {
        return Err(Error::InvalidArgument(format!(
            "first block pools {n} nodes to {k1} clusters, fewer than the final {}",
            inputs.k
        )));
    }
    if cfg.pooler == Pooler::Random {
        let s1 = random_assignment(n, k1, seed)?;
        let s2 = random_assignment(k1, inputs.k, seed.wrapping_add(1))?;
        return finish(inputs, cfg, seed, &s1.dot(&s2), Vec::new(), 0, started);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let f = inputs.x.ncols();
    let model = TwoBlocks {
        first: OneBlock {
            gcn: GcnSkipParams::init(&mut params, "gcn1", f, cfg.hidden, &mut rng),
            mlp: MlpParams::init(&mut params, "mlp1", &[cfg.hidden, cfg.mlp_hidden, k1], &mut rng)?,
        },
        gcn2: GcnSkipParams::init(&mut params, "gcn2", cfg.hidden, cfg.hidden, &mut rng),
        mlp2: MlpParams::init(&mut params, "mlp2", &[cfg.hidden, cfg.mlp_hidden, inputs.k], &mut rng)?,
    };
    let mincut = (&inputs.adj_norm, &inputs.deg_norm);
    let outcome = fit(&mut params, cfg, |params, _, epoch| {
        let mut tape = Tape::new();
        let vars = params.attach(&mut tape);
        let pass = two_block_forward(&mut tape, inputs, &model, &vars)?;
        let first = cluster_loss(&mut tape, pass.s1, &inputs.edge, &inputs.tri, Some(mincut), cfg, epoch)?;
        let (edge2, tri2) = pooled_operators(tape.value(pass.adj_pool), cfg.motif_threshold);
        let second = cluster_loss(&mut tape, pass.s2, &edge2, &tri2, None, cfg, epoch)?;
        let mc_sum = tape.add(first.l_mc, second.l_mc)?;
        let l_mc = tape.scale(mc_sum, 0.5)?;
        let l_o = match (first.l_o, second.l_o) {
            (Some(a), Some(b)) => {
                let sum = tape.add(a, b)?;
                Some(tape.scale(sum, 0.5)?)
            }
            _ => None,
        };
        let total = total_loss(&mut tape, l_mc, l_o, None, cfg.mu)?;
        let l_mc_v = tape.scalar(l_mc);
        let l_o_v = l_o.map_or(0.0, |v| tape.scalar(v));
        let total_v = tape.scalar(total);
        let grads = tape.backward(total)?;
        Ok(EpochEval {
            grads: Some(vars.iter().map(|&v| grads.wrt(v)).collect()),
            l_mc: l_mc_v,
            l_o: l_o_v,
            l_sup: 0.0,
            total: total_v,
            val_accuracy: None,
            score: (-(0.5 * (first.settled_mc + second.settled_mc) + cfg.mu * l_o_v), 0.0),
        })
    })?;
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let pass = two_block_forward(&mut tape, inputs, &model, &vars)?;
    debug_assert_eq!(cfg.mode, Mode::Cluster2Layer);
    finish(inputs, cfg, seed, tape.value(pass.composite), outcome.trace, outcome.best_epoch, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::karate_club;
    use crate::graph::build_graph;
    use ndarray::Array2;

    fn two_cliques() -> SparseGraph {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
        edges.push((4, 5, 1.0));
        let g = build_graph(&edges, 10, None).unwrap();
        let r = Array2::from_shape_fn((10, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 5.0 - 0.4);
        let mut x = g.adjacency().mul_dense(&r);
        x += &r;
        g.with_features(x)
            .unwrap()
            .with_node_labels((0..10).map(|i| i / 5).collect())
            .unwrap()
    }

    fn small_cfg(mode: Mode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(mode);
        cfg.max_epochs = 150;
        cfg.lr = 0.01;
        cfg.mu = 1.0;
        cfg
    }

    #[test]
    fn cliques_are_recovered() {
        let g = two_cliques();
        let cfg = small_cfg(Mode::Cluster);
        let inputs = ClusterInputs::new(&g, &cfg).unwrap();
        let rec = run_clustering(&inputs, &cfg, 0).unwrap();
        assert_eq!(rec.report.as_ref().unwrap().nmi, 1.0, "{:?}", rec.assignment);
        assert!(rec.trace.last().unwrap().total < rec.trace[0].total);
        assert!(rec.epochs_run <= cfg.max_epochs);
    }

    #[test]
    fn identical_seed_identical_record() {
        let g = two_cliques();
        let mut cfg = small_cfg(Mode::Cluster);
        cfg.max_epochs = 30;
        let inputs = ClusterInputs::new(&g, &cfg).unwrap();
        for pooler in [Pooler::Hosc, Pooler::MinCutLoss, Pooler::Random] {
            cfg.pooler = pooler;
            let a = run_clustering(&inputs, &cfg, 3).unwrap();
            let b = run_clustering(&inputs, &cfg, 3).unwrap();
            assert!(a.same_outcome(&b), "{pooler:?}");
        }
    }

    #[test]
    fn two_layer_composite_is_row_stochastic() {
        let g = karate_club(0).unwrap();
        let mut cfg = small_cfg(Mode::Cluster2Layer);
        cfg.max_epochs = 5;
        let inputs = ClusterInputs::new(&g, &cfg).unwrap();
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = TwoBlocks {
            first: OneBlock {
                gcn: GcnSkipParams::init(&mut params, "g1", 10, 32, &mut rng),
                mlp: MlpParams::init(&mut params, "m1", &[32, 32, 8], &mut rng).unwrap(),
            },
            gcn2: GcnSkipParams::init(&mut params, "g2", 32, 32, &mut rng),
            mlp2: MlpParams::init(&mut params, "m2", &[32, 32, 2], &mut rng).unwrap(),
        };
        let mut tape = Tape::new();
        let vars = params.attach(&mut tape);
        let pass = two_block_forward(&mut tape, &inputs, &model, &vars).unwrap();
        let s = tape.value(pass.composite);
        assert_eq!(s.dim(), (34, 2));
        for row in s.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert_eq!(tape.shape(pass.s2), (8, 2));
        let rec = run_clustering_2layer(&inputs, &cfg, 0).unwrap();
        assert_eq!(rec.epochs_run, 5);
    }

    #[test]
    fn pooled_operators_threshold() {
        let a = ndarray::array![[0.5, 0.2, 0.3], [0.2, 0.0, 1e-9], [0.3, 1e-9, 0.0]];
        let (edge, tri) = pooled_operators(&a, 1e-6);
        assert_eq!(edge.a.nnz(), 4);
        assert!(tri.is_zero());
        let a = ndarray::array![[0.0, 0.2, 0.3], [0.2, 0.0, 0.1], [0.3, 0.1, 0.0]];
        let (_, tri) = pooled_operators(&a, 1e-6);
        assert_eq!(tri.a.nnz(), 6);
    }

    #[test]
    fn missing_labels_rejected() {
        let g = build_graph(&[(0, 1, 1.0)], 2, None).unwrap();
        let cfg = ExperimentConfig::defaults(Mode::Cluster);
        assert!(ClusterInputs::new(&g, &cfg).is_err());
    }
}
