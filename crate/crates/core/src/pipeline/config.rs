//! Experiment configuration: defaults per mode, JSON files and `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::data::{
    karate_club, load_tu_dataset, GcParams, LabeledGraphSet, Syn1Params, Syn2Params, Syn3Params,
};
use crate::data::{gen_gc_synthetic, gen_syn1, gen_syn2, gen_syn3};
use crate::error::{Error, Result};
use crate::graph::{read_edge_list, read_features_csv, read_labels, SparseGraph};
use crate::loss::AlphaSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cluster,
    #[serde(rename = "cluster_2layer")]
    Cluster2Layer,
    Classify,
}

/// Which clustering objective drives the assignment matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooler {
    /// Edge and triangle terms with the dynamic weighting.
    Hosc,
    /// Edge term only.
    Hp1,
    /// Triangle term only.
    Hp2,
    /// Global ratio-of-traces objective.
    #[serde(rename = "mincut", alias = "min_cut_loss")]
    MinCutLoss,
    /// Fixed random hard assignment, no clustering loss.
    Random,
    /// No pooling layers (classification only).
    #[serde(rename = "nopool", alias = "no_pool")]
    NoPool,
}

impl Pooler {
    pub fn name(self) -> &'static str {
        match self {
            Pooler::Hosc => "hosc",
            Pooler::Hp1 => "hp1",
            Pooler::Hp2 => "hp2",
            Pooler::MinCutLoss => "mincut",
            Pooler::Random => "random",
            Pooler::NoPool => "nopool",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "hosc" => Pooler::Hosc,
            "hp1" => Pooler::Hp1,
            "hp2" => Pooler::Hp2,
            "mincut" | "min_cut_loss" => Pooler::MinCutLoss,
            "random" => Pooler::Random,
            "nopool" | "no_pool" => Pooler::NoPool,
            other => return Err(Error::InvalidArgument(format!("unknown pooler `{other}`"))),
        })
    }
}

/// Where the graph (or graphs) of an experiment come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Syn1(Syn1Params),
    Syn2(Syn2Params),
    Syn3(Syn3Params),
    Karate {
        #[serde(default)]
        feature_seed: u64,
    },
    EdgeList {
        edges: PathBuf,
        features: Option<PathBuf>,
        labels: PathBuf,
    },
    Gc(GcParams),
    Tu {
        dir: PathBuf,
    },
}

impl DatasetSource {
    /// A single node-labelled graph for clustering.
    pub fn load_graph(&self) -> Result<SparseGraph> {
        match self {
            DatasetSource::Syn1(p) => gen_syn1(p),
            DatasetSource::Syn2(p) => gen_syn2(p),
            DatasetSource::Syn3(p) => gen_syn3(p),
            DatasetSource::Karate { feature_seed } => karate_club(*feature_seed),
            DatasetSource::EdgeList {
                edges,
                features,
                labels,
            } => {
                let labels = read_labels(labels)?;
                let g = read_edge_list(edges, Some(labels.len()))?;
                let g = match features {
                    Some(f) => g.with_features(read_features_csv(f)?)?,
                    None => {
                        let n = g.n();
                        g.with_features(ndarray::Array2::ones((n, 1)))?
                    }
                };
                g.with_node_labels(labels)
            }
            DatasetSource::Gc(_) | DatasetSource::Tu { .. } => Err(Error::InvalidArgument(
                "graph classification dataset used for clustering".into(),
            )),
        }
    }

    /// A labelled graph collection for classification.
    pub fn load_set(&self, split_seed: u64) -> Result<LabeledGraphSet> {
        match self {
            DatasetSource::Gc(p) => gen_gc_synthetic(p),
            DatasetSource::Tu { dir } => load_tu_dataset(dir, split_seed),
            _ => Err(Error::InvalidArgument(
                "node clustering dataset used for classification".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dataset: DatasetSource,
    pub pooler: Pooler,
    pub seeds: Vec<u64>,
    pub lr: f64,
    pub max_epochs: usize,
    pub grad_clip: f64,
    pub early_stop_patience: usize,
    pub lr_decay_patience: usize,
    /// Weight of the orthogonality term.
    pub mu: f64,
    /// `None` ramps the triangle weight from 1 to 0.5 over half of `max_epochs`.
    pub alpha: Option<AlphaSchedule>,
    /// Width of every message-passing layer.
    pub hidden: usize,
    /// Hidden width of the assignment MLP.
    pub mlp_hidden: usize,
    pub batch_size: usize,
    pub pool_ratio: f64,
    /// Number of clusters for clustering modes; defaults to the number of node classes.
    pub clusters: Option<usize>,
    /// Pooled-graph entries above this weight count as edges for the triangle term.
    pub motif_threshold: f64,
    /// Concatenate global pools of every message-passing output before the dense head.
    pub pool_skip: bool,
    pub split_seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        let (max_epochs, early_stop_patience, lr_decay_patience) = match mode {
            Mode::Cluster => (500, 200, 25),
            Mode::Cluster2Layer => (1000, 500, 25),
            Mode::Classify => (500, 100, 50),
        };
        Self {
            mode,
            dataset: match mode {
                Mode::Classify => DatasetSource::Gc(GcParams::default()),
                _ => DatasetSource::Karate { feature_seed: 0 },
            },
            pooler: Pooler::Hosc,
            seeds: (0..10).collect(),
            lr: 0.001,
            max_epochs,
            grad_clip: 2.0,
            early_stop_patience,
            lr_decay_patience,
            mu: match mode {
                Mode::Classify => 0.1,
                _ => 1.0,
            },
            alpha: None,
            hidden: 32,
            mlp_hidden: 32,
            batch_size: 32,
            pool_ratio: 0.25,
            clusters: None,
            motif_threshold: 1e-6,
            pool_skip: false,
            split_seed: 0,
        }
    }

    pub fn alpha_schedule(&self) -> AlphaSchedule {
        self.alpha
            .unwrap_or_else(|| AlphaSchedule::default_for(self.max_epochs))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if !(self.grad_clip > 0.0) {
            return fail(format!("grad_clip must be positive, got {}", self.grad_clip));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return fail(format!("mu must be >= 0, got {}", self.mu));
        }
        for (name, w) in [("hidden", self.hidden), ("mlp_hidden", self.mlp_hidden)] {
            if !(16..=64).contains(&w) {
                return fail(format!("{name} must lie in 16..=64, got {w}"));
            }
        }
        if !(8..=64).contains(&self.batch_size) {
            return fail(format!("batch_size must lie in 8..=64, got {}", self.batch_size));
        }
        if !(self.pool_ratio > 0.0 && self.pool_ratio < 1.0) {
            return fail(format!("pool_ratio must lie in (0, 1), got {}", self.pool_ratio));
        }
        if !(self.motif_threshold >= 0.0) {
            return fail("motif_threshold must be >= 0".into());
        }
        if self.clusters.is_some_and(|k| k < 2) {
            return fail("clusters must be at least 2".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.mode != Mode::Classify && self.pooler == Pooler::NoPool {
            return fail("nopool only applies to classification".into());
        }
        if let Some(a) = &self.alpha {
            a.validate()?;
        }
        Ok(())
    }

    /// Resolves defaults for `mode`, then the keys of `file`, then dotted
    /// `key=value` overrides; values parse as JSON when possible.
    pub fn resolve(mode: Mode, file: Option<&Value>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(Self::defaults(mode))?;
        if let Some(Value::Object(obj)) = file {
            if let Some(m) = obj.get("mode") {
                let file_mode: Mode = serde_json::from_value(m.clone())?;
                if file_mode != mode {
                    value = serde_json::to_value(Self::defaults(file_mode))?;
                }
            }
            for (k, v) in obj {
                value[k.as_str()] = v.clone();
            }
        } else if file.is_some() {
            return Err(Error::InvalidArgument("config file must hold a JSON object".into()));
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override `{item}` is not key=value")))?;
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut value, key, parsed)?;
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(mode: Mode, path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: Value = serde_json::from_str(&text)?;
        Self::resolve(mode, Some(&file), overrides)
    }

    /// SHA-256 of the canonical JSON form, ignoring the seed list.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        v["seeds"] = Value::Null;
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("`{key}` does not name an object field")))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
