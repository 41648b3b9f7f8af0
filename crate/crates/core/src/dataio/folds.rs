//! Seeded k-fold split assignment.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold id per sample id; folds partition the id set with sizes differing
/// by at most one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Ids belonging to one fold, sorted.
    pub fn fold_members(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|&(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Shuffles the ids with a seeded ChaCha8 Fisher–Yates pass, then deals them
/// round-robin over k folds.
pub fn split_folds(ids: &[String], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count {k} must be >= 2")));
    }
    if k > ids.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds {} ids",
            ids.len()
        )));
    }
    {
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ids.len() {
            return Err(Error::invalid("duplicate sample ids"));
        }
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let assignments = order
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (ids[idx].clone(), pos % k))
        .collect();
    Ok(FoldAssignment { seed, k, assignments })
}
