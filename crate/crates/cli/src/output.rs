use std::fs;
use std::path::Path;

use motifpool::pipeline::{mean_std, ExperimentConfig, RunRecord};
use serde::Serialize;

use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct RunRow<'a> {
    seed: u64,
    pooler: &'a str,
    epochs_run: Option<usize>,
    best_epoch: Option<usize>,
    score: Option<f64>,
    nmi: Option<f64>,
    modularity: Option<f64>,
    conductance: Option<f64>,
    motif_conductance: Option<f64>,
    clusters_used_fraction: Option<f64>,
    val_accuracy: Option<f64>,
    test_accuracy: Option<f64>,
    wall_time_secs: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Writes the resolved config, one record and trace per seed, `runs.csv` and
/// `summary.csv`. Returns the summary rows.
pub fn write_run_artifacts(
    out: &Path,
    cfg: &ExperimentConfig,
    results: &[(u64, Result<RunRecord, String>)],
) -> Result<Vec<SummaryRow>, CliError> {
    ensure_dir(&out.join("runs"))?;
    ensure_dir(&out.join("traces"))?;
    write_json(&out.join("config.json"), cfg)?;
    let pooler = cfg.pooler.name();
    let mut rows = csv::Writer::from_path(out.join("runs.csv"))?;
    for (seed, res) in results {
        let row = match res {
            Ok(r) => {
                write_json(&out.join("runs").join(format!("seed_{seed}.json")), r)?;
                let mut trace = csv::Writer::from_path(out.join("traces").join(format!("seed_{seed}.csv")))?;
                for t in &r.trace {
                    trace.serialize(t)?;
                }
                trace.flush()?;
                let rep = r.report.as_ref();
                RunRow {
                    seed: *seed,
                    pooler,
                    epochs_run: Some(r.epochs_run),
                    best_epoch: Some(r.best_epoch),
                    score: Some(r.score()),
                    nmi: rep.map(|x| x.nmi),
                    modularity: rep.map(|x| x.modularity),
                    conductance: rep.map(|x| x.conductance),
                    motif_conductance: rep.map(|x| x.motif_conductance),
                    clusters_used_fraction: rep.map(|x| x.clusters_used_fraction),
                    val_accuracy: r.val_accuracy,
                    test_accuracy: r.test_accuracy,
                    wall_time_secs: Some(r.wall_time_secs),
                    error: None,
                }
            }
            Err(msg) => RunRow {
                seed: *seed,
                pooler,
                epochs_run: None,
                best_epoch: None,
                score: None,
                nmi: None,
                modularity: None,
                conductance: None,
                motif_conductance: None,
                clusters_used_fraction: None,
                val_accuracy: None,
                test_accuracy: None,
                wall_time_secs: None,
                error: Some(msg.clone()),
            },
        };
        rows.serialize(row)?;
    }
    rows.flush()?;

    let ok: Vec<&RunRecord> = results.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    type Getter = fn(&RunRecord) -> Option<f64>;
    let metrics: Vec<(&str, Getter)> = vec![
        ("nmi", |r| r.report.as_ref().map(|x| x.nmi)),
        ("completeness", |r| r.report.as_ref().map(|x| x.completeness)),
        ("homogeneity", |r| r.report.as_ref().map(|x| x.homogeneity)),
        ("modularity", |r| r.report.as_ref().map(|x| x.modularity)),
        ("conductance", |r| r.report.as_ref().map(|x| x.conductance)),
        ("motif_conductance", |r| r.report.as_ref().map(|x| x.motif_conductance)),
        ("clusters_used_fraction", |r| r.report.as_ref().map(|x| x.clusters_used_fraction)),
        ("val_accuracy", |r| r.val_accuracy),
        ("test_accuracy", |r| r.test_accuracy),
    ];
    let mut summary = Vec::new();
    for (name, get) in metrics {
        let xs: Vec<f64> = ok.iter().filter_map(|r| get(r)).collect();
        if xs.is_empty() {
            continue;
        }
        let (mean, std) = mean_std(&xs);
        summary.push(SummaryRow {
            metric: name.to_string(),
            mean,
            std,
            runs: xs.len(),
        });
    }
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(summary)
}
