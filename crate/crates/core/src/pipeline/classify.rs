//! Graph classification: GNN–Pool–GNN–Pool–GNN, mean readout, two dense layers.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cluster::pooled_operators;
use super::config::{ExperimentConfig, Pooler};
use super::{fit, EpochEval, RunRecord};
use crate::autodiff::{Matrix, Tape, Var};
use crate::data::LabeledGraphSet;
use crate::error::{Error, Result};
use crate::graph::{sym_normalize, CsrMatrix, SparseGraph};
use crate::loss::{alpha_at, loss_mc, loss_mc_combined, loss_mincut_ablation, loss_ortho, MotifOperator};
use crate::model::{
    assignment_forward, gcn_skip_forward, mlp_logits, GcnSkipParams, MlpParams, ParamSet, Propagation,
};
use crate::motif::{edge_adjacency, triangle_adjacency};
use crate::pooling::{cluster_count, coarsen, random_assignment};

/// Per-graph constants.
struct GraphInputs {
    x: Matrix,
    label: usize,
    adj: Arc<CsrMatrix>,
    adj_norm: Arc<CsrMatrix>,
    deg_norm: Arc<CsrMatrix>,
    edge: MotifOperator,
    tri: MotifOperator,
    /// Fixed assignments of the random pooler, one per block.
    random: Option<(Matrix, Matrix)>,
}

impl GraphInputs {
    fn new(g: &SparseGraph, k1: usize, k2: usize, random_seed: Option<u64>) -> Result<Self> {
        let x = g
            .features
            .clone()
            .ok_or_else(|| Error::InvalidArgument("classification needs node features".into()))?;
        let label = g
            .graph_label
            .ok_or_else(|| Error::InvalidArgument("classification needs graph labels".into()))?;
        let adj_norm = sym_normalize(g).0;
        let deg_norm = CsrMatrix::diagonal(&adj_norm.row_sums());
        let random = match random_seed {
            Some(seed) => {
                let k1 = k1.min(g.n());
                let s1 = random_assignment(g.n(), k1, seed)?;
                let s2 = random_assignment(k1, k2.min(k1), seed ^ 0x9e37_79b9_7f4a_7c15)?;
                Some((s1, s2))
            }
            None => None,
        };
        Ok(Self {
            x,
            label,
            adj: Arc::new(g.adjacency().clone()),
            adj_norm: Arc::new(adj_norm),
            deg_norm: Arc::new(deg_norm),
            edge: MotifOperator::new(&edge_adjacency(g)),
            tri: MotifOperator::new(&triangle_adjacency(g)),
            random,
        })
    }
}

/// Parameter layout of the classifier.
#[derive(Clone, Debug)]
pub struct ClassifierModel {
    pub gcn: [GcnSkipParams; 3],
    /// Assignment MLPs of the two pooling blocks; empty without pooling.
    pub pool: Vec<MlpParams>,
    pub head: MlpParams,
    /// Clusters of the first and second pooling block.
    pub k1: usize,
    pub k2: usize,
}

impl ClassifierModel {
    pub fn init(params: &mut ParamSet, cfg: &ExperimentConfig, f_in: usize, mean_nodes: f64, classes: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let h = cfg.hidden;
        let k1 = cluster_count(mean_nodes.round() as usize, cfg.pool_ratio).max(2);
        let k2 = cluster_count(k1, cfg.pool_ratio).max(2);
        let gcn = [
            GcnSkipParams::init(params, "gcn1", f_in, h, rng),
            GcnSkipParams::init(params, "gcn2", h, h, rng),
            GcnSkipParams::init(params, "gcn3", h, h, rng),
        ];
        let pool = match cfg.pooler {
            Pooler::NoPool | Pooler::Random => Vec::new(),
            _ => vec![
                MlpParams::init(params, "pool1", &[h, cfg.mlp_hidden, k1], rng)?,
                MlpParams::init(params, "pool2", &[h, cfg.mlp_hidden, k2], rng)?,
            ],
        };
        let readout = if cfg.pool_skip { 3 * h } else { h };
        let head = MlpParams::init(params, "head", &[readout, h, classes], rng)?;
        Ok(Self { gcn, pool, head, k1, k2 })
    }
}

/// Tape handles of one graph's forward pass.
struct GraphPass {
    logits: Var,
    l_mc: Option<Var>,
    l_o: Option<Var>,
}

fn block_loss(
    tape: &mut Tape,
    s: Var,
    edge: &MotifOperator,
    tri: &MotifOperator,
    mincut: (&Arc<CsrMatrix>, &Arc<CsrMatrix>),
    cfg: &ExperimentConfig,
    epoch: usize,
) -> Result<Var> {
    match cfg.pooler {
        Pooler::Hosc => {
            let (a1, a2) = alpha_at(&cfg.alpha_schedule(), epoch);
            loss_mc_combined(tape, s, edge, tri, a1, a2)
        }
        Pooler::Hp1 => loss_mc(tape, s, edge),
        Pooler::Hp2 => loss_mc(tape, s, tri),
        Pooler::MinCutLoss => loss_mincut_ablation(tape, s, mincut.0, mincut.1),
        Pooler::Random | Pooler::NoPool => Ok(tape.scalar_constant(0.0)),
    }
}

fn mean_of(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let sum = tape.add(a, b)?;
    tape.scale(sum, 0.5)
}

fn forward(
    tape: &mut Tape,
    gi: &GraphInputs,
    m: &ClassifierModel,
    vars: &[Var],
    cfg: &ExperimentConfig,
    epoch: usize,
) -> Result<GraphPass> {
    let x = tape.constant(gi.x.clone());
    let h1 = gcn_skip_forward(tape, Propagation::Sparse(&gi.adj_norm), x, &m.gcn[0], vars)?;
    let (h2, h3, l_mc, l_o) = match cfg.pooler {
        Pooler::NoPool => {
            let h2 = gcn_skip_forward(tape, Propagation::Sparse(&gi.adj_norm), h1, &m.gcn[1], vars)?;
            let h3 = gcn_skip_forward(tape, Propagation::Sparse(&gi.adj_norm), h2, &m.gcn[2], vars)?;
            (h2, h3, None, None)
        }
        Pooler::Random => {
            let (s1, s2) = gi.random.as_ref().expect("random assignments prepared");
            let s1 = tape.constant(s1.clone());
            let p1 = coarsen(tape, Propagation::Sparse(&gi.adj), h1, s1)?;
            let h2 = gcn_skip_forward(tape, Propagation::Dense(p1.adj_pool), p1.x_pool, &m.gcn[1], vars)?;
            let s2 = tape.constant(s2.clone());
            let p2 = coarsen(tape, Propagation::Dense(p1.adj_pool), h2, s2)?;
            let h3 = gcn_skip_forward(tape, Propagation::Dense(p2.adj_pool), p2.x_pool, &m.gcn[2], vars)?;
            (h2, h3, None, None)
        }
        _ => {
            let s1 = assignment_forward(tape, h1, &m.pool[0], vars)?;
            let p1 = coarsen(tape, Propagation::Sparse(&gi.adj), h1, s1)?;
            let mc1 = block_loss(tape, s1, &gi.edge, &gi.tri, (&gi.adj_norm, &gi.deg_norm), cfg, epoch)?;
            let h2 = gcn_skip_forward(tape, Propagation::Dense(p1.adj_pool), p1.x_pool, &m.gcn[1], vars)?;
            let s2 = assignment_forward(tape, h2, &m.pool[1], vars)?;
            let p2 = coarsen(tape, Propagation::Dense(p1.adj_pool), h2, s2)?;
            let pooled = tape.value(p1.adj_pool).clone();
            let (edge2, tri2) = pooled_operators(&pooled, cfg.motif_threshold);
            let norm2 = Arc::new(crate::graph::sym_normalize_matrix(&edge2.a).0);
            let deg2 = Arc::new(CsrMatrix::diagonal(&norm2.row_sums()));
            let mc2 = block_loss(tape, s2, &edge2, &tri2, (&norm2, &deg2), cfg, epoch)?;
            let h3 = gcn_skip_forward(tape, Propagation::Dense(p2.adj_pool), p2.x_pool, &m.gcn[2], vars)?;
            let l_mc = mean_of(tape, mc1, mc2)?;
            let l_o = if cfg.mu > 0.0 {
                let o1 = loss_ortho(tape, s1)?;
                let o2 = loss_ortho(tape, s2)?;
                Some(mean_of(tape, o1, o2)?)
            } else {
                None
            };
            (h2, h3, Some(l_mc), l_o)
        }
    };
    let mut readout = tape.mean_rows(h3)?;
    if cfg.pool_skip {
        let r1 = tape.mean_rows(h1)?;
        let r2 = tape.mean_rows(h2)?;
        readout = tape.concat_cols(&[r1, r2, readout])?;
    }
    let logits = mlp_logits(tape, readout, &m.head, vars)?;
    Ok(GraphPass { logits, l_mc, l_o })
}

/// Losses and prediction of one graph, with gradients when requested.
struct GraphResult {
    l_mc: f64,
    l_o: f64,
    l_sup: f64,
    total: f64,
    correct: bool,
    grads: Option<Vec<Matrix>>,
}

fn evaluate_graph(
    gi: &GraphInputs,
    m: &ClassifierModel,
    params: &ParamSet,
    cfg: &ExperimentConfig,
    epoch: usize,
    with_grads: bool,
) -> Result<GraphResult> {
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let pass = forward(&mut tape, gi, m, &vars, cfg, epoch)?;
    let l_sup = tape.cross_entropy_logits(pass.logits, &[gi.label])?;
    let mut total = l_sup;
    if let Some(l_mc) = pass.l_mc {
        total = tape.add(total, l_mc)?;
    }
    if let Some(l_o) = pass.l_o {
        let w = tape.scale(l_o, cfg.mu)?;
        total = tape.add(total, w)?;
    }
    let logits = tape.value(pass.logits);
    let pred = crate::model::argmax_rows(logits)[0];
    let result = GraphResult {
        l_mc: pass.l_mc.map_or(0.0, |v| tape.scalar(v)),
        l_o: pass.l_o.map_or(0.0, |v| tape.scalar(v)),
        l_sup: tape.scalar(l_sup),
        total: tape.scalar(total),
        correct: pred == gi.label,
        grads: None,
    };
    if !with_grads {
        return Ok(result);
    }
    let g = tape.backward(total)?;
    Ok(GraphResult {
        grads: Some(vars.iter().map(|&v| g.wrt(v)).collect()),
        ..result
    })
}

/// Mean of the per-graph results over `idx`, summed in index order.
fn batch_mean(
    graphs: &[GraphInputs],
    idx: &[usize],
    m: &ClassifierModel,
    params: &ParamSet,
    cfg: &ExperimentConfig,
    epoch: usize,
    with_grads: bool,
) -> Result<(GraphResult, f64)> {
    let results: Vec<GraphResult> = idx
        .par_iter()
        .map(|&i| evaluate_graph(&graphs[i], m, params, cfg, epoch, with_grads))
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let mut acc = GraphResult {
        l_mc: 0.0,
        l_o: 0.0,
        l_sup: 0.0,
        total: 0.0,
        correct: false,
        grads: with_grads.then(|| params.values().iter().map(|p| Matrix::zeros(p.dim())).collect()),
    };
    let mut correct = 0usize;
    for r in results {
        acc.l_mc += r.l_mc / n;
        acc.l_o += r.l_o / n;
        acc.l_sup += r.l_sup / n;
        acc.total += r.total / n;
        correct += usize::from(r.correct);
        if let (Some(sum), Some(g)) = (acc.grads.as_mut(), r.grads) {
            for (s, g) in sum.iter_mut().zip(g) {
                s.scaled_add(1.0 / n, &g);
            }
        }
    }
    Ok((acc, correct as f64 / n))
}

/// Trains on the split's training graphs in shuffled mini-batches, keeps the
/// epoch with the best validation accuracy (ties: lower validation loss),
/// and reports its test accuracy.
pub fn run_classification(data: &LabeledGraphSet, cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let started = Instant::now();
    for (name, part) in [("train", &data.split.train), ("validation", &data.split.val), ("test", &data.split.test)] {
        if part.is_empty() {
            return Err(Error::EmptySplit(name));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let model = ClassifierModel::init(
        &mut params,
        cfg,
        data.feature_dim(),
        data.mean_nodes(),
        data.num_classes.max(2),
        &mut rng,
    )?;
    let graphs: Vec<GraphInputs> = data
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let random_seed = (cfg.pooler == Pooler::Random)
                .then(|| seed.wrapping_mul(0x1000_0000_01b3).wrapping_add(i as u64));
            GraphInputs::new(g, model.k1, model.k2, random_seed)
        })
        .collect::<Result<_>>()?;
    let mut order = data.split.train.clone();
    let outcome = fit(&mut params, cfg, |params, adam, epoch| {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for batch in order.chunks(cfg.batch_size) {
            let (mean, _) = batch_mean(&graphs, batch, &model, params, cfg, epoch, true)?;
            let w = batch.len() as f64 / order.len() as f64;
            for (s, v) in sums.iter_mut().zip([mean.l_mc, mean.l_o, mean.l_sup, mean.total]) {
                *s += w * v;
            }
            let grads = mean.grads.expect("gradients requested");
            if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(params, grads, cfg.grad_clip);
        }
        let (val, val_acc) = batch_mean(&graphs, &data.split.val, &model, params, cfg, epoch, false)?;
        Ok(EpochEval {
            grads: None,
            l_mc: sums[0],
            l_o: sums[1],
            l_sup: sums[2],
            total: sums[3],
            val_accuracy: Some(val_acc),
            score: (val_acc, -val.total),
        })
    })?;
    let last = cfg.max_epochs;
    let (_, val_acc) = batch_mean(&graphs, &data.split.val, &model, &params, cfg, last, false)?;
    let (_, test_acc) = batch_mean(&graphs, &data.split.test, &model, &params, cfg, last, false)?;
    Ok(RunRecord {
        config_hash: cfg.hash(),
        seed,
        mode: cfg.mode,
        pooler: cfg.pooler,
        epochs_run: outcome.trace.len(),
        best_epoch: outcome.best_epoch,
        trace: outcome.trace,
        report: None,
        val_accuracy: Some(val_acc),
        test_accuracy: Some(test_acc),
        assignment: None,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gc_synthetic, GcParams};
    use crate::pipeline::config::Mode;

    fn small_set() -> LabeledGraphSet {
        gen_gc_synthetic(&GcParams {
            graphs: 20,
            ..GcParams::default()
        })
        .unwrap()
    }

    fn cfg(pooler: Pooler) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(Mode::Classify);
        c.pooler = pooler;
        c.max_epochs = 3;
        c.batch_size = 8;
        c
    }

    #[test]
    fn batch_gradient_is_mean_of_single_graph_gradients() {
        let data = small_set();
        for pooler in [Pooler::Hosc, Pooler::Random, Pooler::NoPool] {
            let cfg = cfg(pooler);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut params = ParamSet::new();
            let m = ClassifierModel::init(&mut params, &cfg, 1, data.mean_nodes(), 2, &mut rng).unwrap();
            let graphs: Vec<GraphInputs> = data
                .graphs
                .iter()
                .enumerate()
                .map(|(i, g)| GraphInputs::new(g, m.k1, m.k2, Some(i as u64)).unwrap())
                .collect();
            let idx = [0, 3, 4, 7, 11];
            let (mean, _) = batch_mean(&graphs, &idx, &m, &params, &cfg, 0, true).unwrap();
            let singles: Vec<GraphResult> = idx
                .iter()
                .map(|&i| evaluate_graph(&graphs[i], &m, &params, &cfg, 0, true).unwrap())
                .collect();
            let expect: f64 = singles.iter().map(|r| r.total).sum::<f64>() / idx.len() as f64;
            assert!((mean.total - expect).abs() < 1e-9, "{pooler:?}");
            let grads = mean.grads.unwrap();
            for (p, g) in grads.iter().enumerate() {
                let mut e = Matrix::zeros(g.dim());
                for r in &singles {
                    e += &r.grads.as_ref().unwrap()[p];
                }
                e /= idx.len() as f64;
                assert!((g - &e).iter().all(|d| d.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn every_pooler_runs_and_repeats() {
        let data = small_set();
        for pooler in [Pooler::Hosc, Pooler::Hp1, Pooler::Hp2, Pooler::MinCutLoss, Pooler::Random, Pooler::NoPool] {
            let c = cfg(pooler);
            let a = run_classification(&data, &c, 1).unwrap();
            let b = run_classification(&data, &c, 1).unwrap();
            assert!(a.same_outcome(&b), "{pooler:?}");
            assert_eq!(a.epochs_run, 3);
            let acc = a.test_accuracy.unwrap();
            assert!((0.0..=1.0).contains(&acc));
            if matches!(pooler, Pooler::Random | Pooler::NoPool) {
                assert!(a.trace.iter().all(|t| t.l_mc == 0.0 && t.l_o == 0.0));
            }
        }
    }

    #[test]
    fn skip_readout_widens_head() {
        let mut c = cfg(Pooler::Hosc);
        c.pool_skip = true;
        let mut params = ParamSet::new();
        let m = ClassifierModel::init(&mut params, &c, 1, 30.0, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.head.widths, vec![96, 32, 2]);
        assert_eq!((m.k1, m.k2), (7, 2));
        run_classification(&small_set(), &c, 0).unwrap();
    }

    #[test]
    fn empty_split_rejected() {
        let mut data = small_set();
        data.split.val.clear();
        assert!(matches!(
            run_classification(&data, &cfg(Pooler::Hosc), 0),
            Err(Error::EmptySplit("validation"))
        ));
    }
}
