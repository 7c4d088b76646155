//! Datasets: synthetic generators, the karate club, and TU benchmark files.

mod karate;
mod synthetic;
mod tu;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;

pub use karate::{karate_club, KARATE_EDGES, KARATE_MR_HI};
pub use synthetic::{
    gen_gc_synthetic, gen_gnp, gen_syn1, gen_syn2, gen_syn3, GcParams, Syn1Params, Syn2Params, Syn3Params,
};
pub use tu::{load_tu_dataset, write_tu_dataset};

/// Index lists into a graph collection.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Graphs carrying a `graph_label`, with a train/validation/test split.
#[derive(Clone, Debug)]
pub struct LabeledGraphSet {
    pub graphs: Vec<SparseGraph>,
    pub split: Split,
    pub num_classes: usize,
}

impl LabeledGraphSet {
    pub fn labels(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .map(|g| g.graph_label.expect("labelled graph"))
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs
            .first()
            .and_then(|g| g.features.as_ref())
            .map_or(0, |x| x.ncols())
    }

    pub fn mean_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.n() as f64).sum::<f64>() / self.graphs.len() as f64
    }
}

/// 80/10/10 split stratified by label: within each class, shuffled positions
/// below 80% go to train and the next 10% to validation.
pub fn stratified_split(labels: &[usize], seed: u64) -> Split {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    for c in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let m = members.len();
        let train_end = (8 * m).div_ceil(10);
        let val_end = (9 * m).div_ceil(10);
        for (p, i) in members.into_iter().enumerate() {
            if p < train_end {
                split.train.push(i);
            } else if p < val_end {
                split.val.push(i);
            } else {
                split.test.push(i);
            }
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}

/// Parameters of every generator, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Syn1(Syn1Params),
    Syn2(Syn2Params),
    Syn3(Syn3Params),
    Gc(GcParams),
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match self {
            GeneratorSpec::Syn1(p) if p.communities < 2 => bad("syn1 needs at least 2 communities"),
            GeneratorSpec::Syn1(p) if p.nodes < 3 * p.communities => {
                bad("syn1 needs at least 3 nodes per community")
            }
            GeneratorSpec::Syn2(p) if !(0.0..=1.0).contains(&p.p) => bad("syn2 p must lie in [0, 1]"),
            GeneratorSpec::Syn3(p) if p.partitions < 2 => bad("syn3 needs at least 2 partitions"),
            GeneratorSpec::Syn3(p) if p.nodes < 2 * p.partitions => {
                bad("syn3 needs at least 2 nodes per partition")
            }
            GeneratorSpec::Gc(p) if p.graphs < 20 => bad("gc needs at least 20 graphs"),
            _ => Ok(()),
        }
    }
}
