//! Training runs: node clustering (one or two pooling blocks) and graph
//! classification, sharing one optimiser loop.

mod classify;
mod cluster;
pub mod config;
pub mod optim;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::metrics::ClusteringReport;
use crate::model::ParamSet;

pub use classify::{run_classification, ClassifierModel};
pub use cluster::{run_clustering, run_clustering_2layer, ClusterInputs};
pub use config::{DatasetSource, ExperimentConfig, Mode, Pooler};
pub use optim::{Adam, Plateau};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub l_mc: f64,
    pub l_o: f64,
    pub l_sup: f64,
    pub total: f64,
    pub lr: f64,
    pub val_accuracy: Option<f64>,
}

/// Everything one (config, seed) run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub pooler: Pooler,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub trace: Vec<EpochTrace>,
    pub report: Option<ClusteringReport>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Final hard assignment of a clustering run.
    pub assignment: Option<Vec<usize>>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        a == *other
    }

    /// The headline number: NMI for clustering, test accuracy for classification.
    pub fn score(&self) -> f64 {
        match (&self.report, self.test_accuracy) {
            (Some(r), _) => r.nmi,
            (None, Some(acc)) => acc,
            (None, None) => f64::NAN,
        }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Result of one epoch.
pub(crate) struct EpochEval {
    /// Gradients at the evaluated parameters, applied by `fit` after the
    /// checkpoint decision. `None` when the epoch already stepped itself and
    /// the score describes the parameters it left behind.
    pub grads: Option<Vec<Matrix>>,
    pub l_mc: f64,
    pub l_o: f64,
    pub l_sup: f64,
    pub total: f64,
    pub val_accuracy: Option<f64>,
    /// Selection score, larger is better.
    pub score: (f64, f64),
}

pub(crate) struct FitOutcome {
    pub trace: Vec<EpochTrace>,
    pub best_epoch: usize,
}

/// Adam with clipping, learning-rate halving and early stopping. The
/// parameters behind the best-scoring epoch are restored on return.
pub(crate) fn fit<F>(params: &mut ParamSet, cfg: &ExperimentConfig, mut epoch_fn: F) -> Result<FitOutcome>
where
    F: FnMut(&mut ParamSet, &mut Adam, usize) -> Result<EpochEval>,
{
    let mut adam = Adam::new(params, cfg.lr);
    let mut plateau = Plateau::default();
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut trace = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let eval = epoch_fn(params, &mut adam, epoch).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteLoss { epoch },
            other => other,
        })?;
        let bad_grad = eval
            .grads
            .iter()
            .flatten()
            .any(|g| g.iter().any(|x| !x.is_finite()));
        if !eval.total.is_finite() || bad_grad {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(EpochTrace {
            epoch,
            l_mc: eval.l_mc,
            l_o: eval.l_o,
            l_sup: eval.l_sup,
            total: eval.total,
            lr: adam.lr,
            val_accuracy: eval.val_accuracy,
        });
        if plateau.observe(eval.score) {
            best.clone_from(params);
            best_epoch = epoch;
        } else if plateau.stale >= cfg.early_stop_patience {
            break;
        }
        if plateau.since_decay >= cfg.lr_decay_patience {
            adam.lr *= 0.5;
            plateau.decayed();
        }
        if let Some(grads) = eval.grads {
            adam.step(params, grads, cfg.grad_clip);
        }
    }
    *params = best;
    Ok(FitOutcome { trace, best_epoch })
}

/// Runs `run` for every seed on up to `workers` threads; results come back
/// in seed order whatever the worker count.
pub fn run_seeds<F>(seeds: &[u64], workers: usize, run: F) -> Vec<Result<RunRecord>>
where
    F: Fn(u64) -> Result<RunRecord> + Sync + Send,
{
    if workers <= 1 {
        return seeds.iter().map(|&s| run(s)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| seeds.par_iter().map(|&s| run(s)).collect()),
        Err(_) => seeds.iter().map(|&s| run(s)).collect(),
    }
}

/// Dispatches on `cfg.mode`, loading the dataset once.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Result<RunRecord>>> {
    cfg.validate()?;
    Ok(match cfg.mode {
        Mode::Cluster | Mode::Cluster2Layer => {
            let g = cfg.dataset.load_graph()?;
            let inputs = ClusterInputs::new(&g, cfg)?;
            run_seeds(&cfg.seeds, workers, |seed| match cfg.mode {
                Mode::Cluster => run_clustering(&inputs, cfg, seed),
                _ => run_clustering_2layer(&inputs, cfg, seed),
            })
        }
        Mode::Classify => {
            let data = cfg.dataset.load_set(cfg.split_seed)?;
            run_seeds(&cfg.seeds, workers, |seed| run_classification(&data, cfg, seed))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    fn quadratic_cfg(max_epochs: usize, patience: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(Mode::Cluster);
        cfg.max_epochs = max_epochs;
        cfg.early_stop_patience = patience;
        cfg.lr = 0.1;
        cfg
    }

    fn quadratic_eval(p: &ParamSet, target: f64) -> EpochEval {
        let x = p.values()[0][[0, 0]];
        let total = (x - target).powi(2);
        EpochEval {
            grads: Some(vec![array![[2.0 * (x - target)]]]),
            l_mc: total,
            l_o: 0.0,
            l_sup: 0.0,
            total,
            val_accuracy: None,
            score: (-total, 0.0),
        }
    }

    #[test]
    fn fit_descends_and_restores_best() {
        let mut p = ParamSet::new();
        p.add("x", array![[3.0]]);
        let out = fit(&mut p, &quadratic_cfg(200, 200), |p, _, _| Ok(quadratic_eval(p, 1.0))).unwrap();
        assert_eq!(out.trace.len(), 200);
        let best = out.trace.iter().map(|t| t.total).fold(f64::INFINITY, f64::min);
        assert_eq!(out.trace[out.best_epoch].total, best);
        assert_eq!(quadratic_eval(&p, 1.0).total, best);
        assert!(best < 1e-2);
    }

    #[test]
    fn fit_stops_after_patience() {
        let mut p = ParamSet::new();
        p.add("x", array![[0.0]]);
        // constant score: only the first epoch counts as an improvement
        let out = fit(&mut p, &quadratic_cfg(100, 5), |_, _, _| {
            Ok(EpochEval {
                grads: Some(vec![array![[1.0]]]),
                l_mc: 0.0,
                l_o: 0.0,
                l_sup: 0.0,
                total: 0.0,
                val_accuracy: None,
                score: (0.0, 0.0),
            })
        })
        .unwrap();
        assert_eq!(out.trace.len(), 6);
        assert_eq!(out.best_epoch, 0);
        assert_eq!(p.values()[0][[0, 0]], 0.0);
    }

    #[test]
    fn fit_rejects_nan() {
        let mut p = ParamSet::new();
        p.add("x", array![[0.0]]);
        let r = fit(&mut p, &quadratic_cfg(10, 5), |p, _, e| {
            let mut ev = quadratic_eval(p, 1.0);
            if e == 3 {
                ev.total = f64::NAN;
            }
            Ok(ev)
        });
        assert!(matches!(r, Err(Error::NonFiniteLoss { epoch: 3 })));
    }

    #[test]
    fn learning_rate_halves_on_plateau() {
        let mut p = ParamSet::new();
        p.add("x", array![[0.0]]);
        let mut cfg = quadratic_cfg(12, 100);
        cfg.lr_decay_patience = 3;
        let out = fit(&mut p, &cfg, |_, _, _| {
            Ok(EpochEval {
                grads: Some(vec![array![[0.0]]]),
                l_mc: 0.0,
                l_o: 0.0,
                l_sup: 0.0,
                total: 0.0,
                val_accuracy: None,
                score: (0.0, 0.0),
            })
        })
        .unwrap();
        let lrs: Vec<f64> = out.trace.iter().map(|t| t.lr).collect();
        assert_eq!(&lrs[..5], &[0.1, 0.1, 0.1, 0.1, 0.05]);
        assert_eq!(lrs[11], 0.1 / 8.0);
    }
}
