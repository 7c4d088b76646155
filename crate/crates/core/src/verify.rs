//! Randomised checks of the motif identities against exhaustive enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::gen_gnp;
use crate::error::Result;
use crate::motif::{
    motif_adjacency_bruteforce, triangle_adjacency, verify_four_node_identity,
    verify_triangle_identity, Motif,
};

/// Edge probabilities cycled through by the random cases.
pub const ORACLE_DENSITIES: [f64; 3] = [0.1, 0.3, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    /// Seeds of the failing cases.
    pub failures: Vec<u64>,
}

impl OracleCheck {
    pub fn ok(&self) -> bool {
        self.passed == self.cases
    }
}

fn check(name: &str, graphs: usize, seed: u64, mut case: impl FnMut(u64, f64) -> Result<bool>) -> Result<OracleCheck> {
    let mut out = OracleCheck {
        name: name.to_string(),
        cases: graphs,
        passed: 0,
        failures: Vec::new(),
    };
    for c in 0..graphs {
        let s = seed.wrapping_add(c as u64);
        if case(s, ORACLE_DENSITIES[c % ORACLE_DENSITIES.len()])? {
            out.passed += 1;
        } else {
            out.failures.push(s);
        }
    }
    Ok(out)
}

/// Runs every oracle on `graphs` random `G(n, p)` instances each.
pub fn run_oracles(graphs: usize, n: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let tri = check("triangle_adjacency_bruteforce", graphs, seed, |s, p| {
        let g = gen_gnp(n, p, s)?;
        let fast = triangle_adjacency(&g).a_m.to_dense();
        let slow = motif_adjacency_bruteforce(&g, Motif::Triangle)?.a_m.to_dense();
        Ok(fast == slow)
    })?;
    let cut = check("triangle_cut_volume", graphs, seed, |s, p| {
        let g = gen_gnp(n, p, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
        let k = rng.random_range(2..=4);
        let partition: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        verify_triangle_identity(&g, &partition)
    })?;
    let mut four = Vec::new();
    for (name, motif) in [("four_cycle_identity", Motif::FourCycle), ("k4_identity", Motif::K4)] {
        four.push(check(name, graphs, seed, |s, p| {
            let g = gen_gnp(n, p, s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x4c4);
            let subset: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            verify_four_node_identity(&g, motif, &subset)
        })?);
    }
    Ok([tri, cut].into_iter().chain(four).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass_on_small_graphs() {
        let checks = run_oracles(6, 12, 3).unwrap();
        assert_eq!(checks.len(), 4);
        for c in &checks {
            assert!(c.ok(), "{c:?}");
            assert_eq!(c.cases, 6);
        }
    }

    #[test]
    fn oversized_graphs_are_rejected() {
        assert!(run_oracles(1, crate::motif::ORACLE_LIMIT + 1, 0).is_err());
    }
}
