use std::fs;
use std::io::Write;
use std::path::Path;

use motifpool::data::LabeledGraphSet;
use motifpool::graph::{read_edge_list, read_labels, write_edge_list, write_features_csv, write_labels, SparseGraph};
use motifpool::metrics::{completeness, conductance, homogeneity, modularity, motif_conductance, nmi};
use motifpool::motif::{
    edge_adjacency, enumerate_instances, motif_adjacency_bruteforce, triangle_adjacency, triangle_count, Motif,
};
use motifpool::pipeline::{run_experiment, DatasetSource, ExperimentConfig, Mode};
use motifpool::verify::run_oracles;
use serde_json::{json, Map, Value};

use crate::args::{ClusterArgs, DatasetKind, GenDataArgs, MetricsArgs, MotifArgs, MotifKind, RunArgs, VerifyArgs};
use crate::output::{ensure_dir, write_json, write_run_artifacts};
use crate::CliError;

/// `N` means seeds `0..N`; anything with a comma is an explicit list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("--seeds expects N or a,b,c; got `{s}`"));
    if s.contains(',') {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let n: u64 = s.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        Ok((0..n).collect())
    }
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn with_path<T>(path: &Path, r: motifpool::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn resolve_config(mode: Mode, a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut overrides = a.overrides.clone();
    if let Some(p) = &a.pooler {
        overrides.push(format!("pooler={p}"));
    }
    if let Some(s) = &a.seeds {
        overrides.push(format!("seeds={}", serde_json::to_string(&parse_seeds(s)?)?));
    }
    let file = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            Some(
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    ExperimentConfig::resolve(mode, file.as_ref(), &overrides).map_err(|e| match e {
        motifpool::Error::Io(io) => CliError::Data(io.to_string()),
        other => CliError::Usage(other.to_string()),
    })
}

fn run_and_report(cfg: &ExperimentConfig, a: &RunArgs) -> Result<(), CliError> {
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let out = &a.out.out;
    ensure_dir(out)?;
    let records = run_experiment(cfg, a.workers)?;
    let mut worst: Option<CliError> = None;
    let mut results = Vec::new();
    for (&seed, rec) in cfg.seeds.iter().zip(records) {
        match rec {
            Ok(r) => results.push((seed, Ok(r))),
            Err(e) => {
                results.push((seed, Err(e.to_string())));
                let err = CliError::from(e);
                if worst.as_ref().is_none_or(|w| err_rank(&err) > err_rank(w)) {
                    worst = Some(err);
                }
            }
        }
    }
    let summary = write_run_artifacts(out, cfg, &results)?;
    for row in &summary {
        emit(&format!("{:<24} {:.4} ± {:.4} ({} runs)", row.metric, row.mean, row.std, row.runs))?;
    }
    emit(&format!("artifacts in {}", out.display()))?;
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn err_rank(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 0,
        CliError::Data(_) => 1,
        CliError::Numerical(_) => 2,
    }
}

pub fn cluster(a: &ClusterArgs) -> Result<(), CliError> {
    let mode = if a.two_layer { Mode::Cluster2Layer } else { Mode::Cluster };
    let cfg = resolve_config(mode, &a.run)?;
    if cfg.mode != mode {
        return Err(CliError::Usage(format!(
            "config is for mode {:?} but the command asks for {mode:?}",
            cfg.mode
        )));
    }
    run_and_report(&cfg, &a.run)
}

pub fn classify(a: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(Mode::Classify, a)?;
    if cfg.mode != Mode::Classify {
        return Err(CliError::Usage(format!("config is for mode {:?}, not classify", cfg.mode)));
    }
    run_and_report(&cfg, a)
}

fn dataset_source(a: &GenDataArgs) -> Result<DatasetSource, CliError> {
    let kind = match a.dataset {
        DatasetKind::Syn1 => "syn1",
        DatasetKind::Syn2 => "syn2",
        DatasetKind::Syn3 => "syn3",
        DatasetKind::Karate => "karate",
        DatasetKind::Gc => "gc",
    };
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(kind.into()));
    for item in &a.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{item}` is not key=value")))?;
        obj.insert(k.to_string(), parse_value(v));
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_graph(g: &SparseGraph, out: &Path) -> Result<(), CliError> {
    write_edge_list(g, &out.join("edges.txt"))?;
    if let Some(x) = &g.features {
        write_features_csv(x, &out.join("features.csv"))?;
    }
    if let Some(l) = &g.node_labels {
        write_labels(l, &out.join("labels.txt"))?;
    }
    Ok(())
}

pub fn gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let source = dataset_source(a)?;
    let out = &a.out.out;
    ensure_dir(out)?;
    write_json(&out.join("dataset.json"), &source)?;
    if matches!(a.dataset, DatasetKind::Gc) {
        let set: LabeledGraphSet = source.load_set(0)?;
        motifpool::data::write_tu_dataset(&set, out, &a.name)?;
        emit(&format!("{} graphs written to {}", set.graphs.len(), out.display()))?;
    } else {
        let g = source.load_graph()?;
        write_graph(&g, out)?;
        emit(&format!("{} nodes, {} edges written to {}", g.n(), g.edge_count(), out.display()))?;
    }
    Ok(())
}

pub fn motif(a: &MotifArgs) -> Result<(), CliError> {
    let g = with_path(&a.edges, read_edge_list(&a.edges, None))?;
    let (m, instances) = match a.motif {
        MotifKind::Edge => (edge_adjacency(&g), g.edge_count()),
        MotifKind::Triangle => (triangle_adjacency(&g), triangle_count(&g)),
        MotifKind::FourCycle | MotifKind::K4 => {
            let motif = if matches!(a.motif, MotifKind::K4) { Motif::K4 } else { Motif::FourCycle };
            let count = enumerate_instances(&g, motif)?.len();
            (motif_adjacency_bruteforce(&g, motif)?, count)
        }
    };
    let out = &a.out.out;
    ensure_dir(out)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out.join("motif_adjacency.txt"))?);
    writeln!(w, "# nodes {}", g.n())?;
    for i in 0..m.n() {
        for (j, v) in m.a_m.row(i) {
            if j > i {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
    }
    w.flush()?;
    let summary = json!({
        "motif": m.motif,
        "nodes": g.n(),
        "instances": instances,
        "nonzeros": m.a_m.nnz(),
        "density": m.density(),
    });
    write_json(&out.join("motif.json"), &summary)?;
    emit(&serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

pub fn metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let pred = with_path(&a.pred, read_labels(&a.pred))?;
    let truth = with_path(&a.truth, read_labels(&a.truth))?;
    let mut report = Map::new();
    report.insert("nmi".into(), json!(nmi(&pred, &truth)?));
    report.insert("homogeneity".into(), json!(homogeneity(&pred, &truth)?));
    report.insert("completeness".into(), json!(completeness(&pred, &truth)?));
    if let Some(edges) = &a.edges {
        let g = with_path(edges, read_edge_list(edges, Some(pred.len())))?;
        report.insert("modularity".into(), json!(modularity(&g, &pred)?));
        report.insert("conductance".into(), json!(conductance(&g, &pred)?));
        report.insert("motif_conductance".into(), json!(motif_conductance(&g, &pred)?));
    }
    let out = &a.out.out;
    ensure_dir(out)?;
    let report = Value::Object(report);
    write_json(&out.join("metrics.json"), &report)?;
    emit(&serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    if a.graphs == 0 || a.n < 4 {
        return Err(CliError::Usage("verify needs --graphs >= 1 and --n >= 4".into()));
    }
    let checks = run_oracles(a.graphs, a.n, a.seed)?;
    let out = &a.out.out;
    ensure_dir(out)?;
    let all_ok = checks.iter().all(|c| c.ok());
    let report = json!({ "pass": all_ok, "checks": checks });
    write_json(&out.join("verify.json"), &report)?;
    emit(&serde_json::to_string_pretty(&report)?)?;
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Numerical("motif identity check failed".into()))
    }
}
