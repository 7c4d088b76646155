//! TU benchmark text format: `DS_A.txt`, `DS_graph_indicator.txt`,
//! `DS_graph_labels.txt`, optional `DS_node_labels.txt` and
//! `DS_node_attributes.txt`. Node and graph ids are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{stratified_split, LabeledGraphSet};
use crate::error::{Error, Result};
use crate::graph::{graph_from_edge_set, SparseGraph};

/// Dataset name `DS` taken from the single `DS_A.txt` in `dir`.
fn dataset_prefix(dir: &Path) -> Result<String> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(prefix) = name.strip_suffix("_A.txt") {
            names.push(prefix.to_string());
        }
    }
    names.sort();
    match names.len() {
        0 => Err(Error::MissingFile(dir.join("DS_A.txt"))),
        1 => Ok(names.remove(0)),
        _ => Err(Error::Inconsistent(format!(
            "several datasets in {}: {names:?}",
            dir.display()
        ))),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_ints(path: &Path) -> Result<Vec<i64>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| l.parse::<i64>().map_err(|e| parse_err(path, n, e.to_string())))
        .collect()
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

/// Maps arbitrary integer labels to `0..C` in sorted order.
fn remap(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<i64> = values.iter().copied().collect();
    let index: BTreeMap<i64, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (values.iter().map(|v| index[v]).collect(), distinct.len())
}

/// Loads every graph of a TU dataset directory with a stratified split.
///
/// Features are node attributes when present, otherwise one-hot node
/// labels, otherwise a constant column.
pub fn load_tu_dataset(dir: &Path, split_seed: u64) -> Result<LabeledGraphSet> {
    let ds = dataset_prefix(dir)?;
    let file = |suffix: &str| dir.join(format!("{ds}_{suffix}.txt"));
    let a_path = require(file("A"))?;
    let ind_path = require(file("graph_indicator"))?;
    let gl_path = require(file("graph_labels"))?;

    let indicator = parse_ints(&ind_path)?;
    let graph_labels = parse_ints(&gl_path)?;
    let n_graphs = graph_labels.len();
    let n_nodes = indicator.len();
    let mut graph_of = Vec::with_capacity(n_nodes);
    for (v, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > n_graphs {
            return Err(Error::Inconsistent(format!(
                "node {} assigned to graph {gid}, but only {n_graphs} graph labels",
                v + 1
            )));
        }
        graph_of.push(gid as usize - 1);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_graphs];
    let mut local = vec![0usize; n_nodes];
    for (v, &g) in graph_of.iter().enumerate() {
        local[v] = members[g].len();
        members[g].push(v);
    }
    if let Some(g) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::Inconsistent(format!("graph {} has no nodes", g + 1)));
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (line, text) in read_lines(&a_path)? {
        let mut parts = text.split(',').map(|s| s.trim().parse::<usize>());
        let (Some(Ok(u)), Some(Ok(v)), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(&a_path, line, "expected `i, j`"));
        };
        for id in [u, v] {
            if id < 1 || id > n_nodes {
                return Err(parse_err(&a_path, line, format!("node id {id} out of range")));
            }
        }
        let (u, v) = (u - 1, v - 1);
        if graph_of[u] != graph_of[v] {
            return Err(Error::Inconsistent(format!(
                "edge {} - {} joins graphs {} and {}",
                u + 1,
                v + 1,
                graph_of[u] + 1,
                graph_of[v] + 1
            )));
        }
        edges[graph_of[u]].push((local[u], local[v]));
    }

    let attr_path = file("node_attributes");
    let label_path = file("node_labels");
    let features: Array2<f64> = if attr_path.is_file() {
        let rows = read_lines(&attr_path)?;
        if rows.len() != n_nodes {
            return Err(Error::Inconsistent(format!(
                "{} attribute rows for {n_nodes} nodes",
                rows.len()
            )));
        }
        let parsed: Vec<Vec<f64>> = rows
            .iter()
            .map(|(n, l)| {
                l.split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err(&attr_path, *n, e.to_string())))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let width = parsed[0].len();
        if parsed.iter().any(|r| r.len() != width) {
            return Err(Error::Inconsistent("ragged node attributes".into()));
        }
        Array2::from_shape_fn((n_nodes, width), |(i, j)| parsed[i][j])
    } else if label_path.is_file() {
        let raw = parse_ints(&label_path)?;
        if raw.len() != n_nodes {
            return Err(Error::Inconsistent(format!(
                "{} node labels for {n_nodes} nodes",
                raw.len()
            )));
        }
        let (ids, width) = remap(&raw);
        let mut x = Array2::zeros((n_nodes, width));
        for (v, &c) in ids.iter().enumerate() {
            x[[v, c]] = 1.0;
        }
        x
    } else {
        Array2::ones((n_nodes, 1))
    };

    let (labels, num_classes) = remap(&graph_labels);
    let graphs: Vec<SparseGraph> = members
        .iter()
        .zip(edges)
        .zip(&labels)
        .map(|((nodes, es), &label)| {
            let x = features.select(ndarray::Axis(0), nodes);
            let mut g = graph_from_edge_set(nodes.len(), es)
                .with_features(x)
                .expect("feature rows match node count");
            g.graph_label = Some(label);
            g
        })
        .collect();
    Ok(LabeledGraphSet {
        split: stratified_split(&labels, split_seed),
        graphs,
        num_classes,
    })
}

/// Writes `set` as `{name}_*.txt` files in `dir`, features as attributes.
pub fn write_tu_dataset(set: &LabeledGraphSet, dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let open = |suffix: &str| -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(
            dir.join(format!("{name}_{suffix}.txt")),
        )?))
    };
    let mut a = open("A")?;
    let mut ind = open("graph_indicator")?;
    let mut gl = open("graph_labels")?;
    let mut attr = open("node_attributes")?;
    let mut offset = 0;
    for (gi, g) in set.graphs.iter().enumerate() {
        for i in 0..g.n() {
            for j in g.neighbors(i) {
                writeln!(a, "{}, {}", offset + i + 1, offset + j + 1)?;
            }
            writeln!(ind, "{}", gi + 1)?;
            if let Some(x) = &g.features {
                let row: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
                writeln!(attr, "{}", row.join(", "))?;
            }
        }
        writeln!(gl, "{}", g.graph_label.unwrap_or(0))?;
        offset += g.n();
    }
    for mut w in [a, ind, gl, attr] {
        w.flush()?;
    }
    Ok(())
}
