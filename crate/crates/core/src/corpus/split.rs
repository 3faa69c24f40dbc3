use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dialogue;

/// A low-resource split: a seeded labeled sample of the training pool, the
/// remainder as an unlabeled pool, and untouched validation/test sets.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<Dialogue>,
    /// Training-pool dialogues not sampled, with gold states removed.
    pub unlabeled: Vec<Dialogue>,
    pub valid: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
    pub ratio: f64,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn with_evaluation(mut self, valid: Vec<Dialogue>, test: Vec<Dialogue>) -> Self {
        self.valid = valid;
        self.test = test;
        self
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            ratio: self.ratio,
            seed: self.seed,
            labeled: self.train.iter().map(|d| d.dialogue_id.clone()).collect(),
            unlabeled: self
                .unlabeled
                .iter()
                .map(|d| d.dialogue_id.clone())
                .collect(),
        }
    }
}

/// Which dialogue ids a split labeled; written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub ratio: f64,
    pub seed: u64,
    pub labeled: Vec<String>,
    pub unlabeled: Vec<String>,
}

/// Number of dialogues a ratio selects from a pool of `pool_len`.
pub fn sample_size(ratio: f64, pool_len: usize) -> usize {
    // the epsilon absorbs representation error such as 0.1 * 8430 = 842.999..
    ((ratio * pool_len as f64) + 1e-9).floor() as usize
}

/// Sample `floor(ratio * |pool|)` dialogues without replacement.
///
/// Selection depends only on the set of dialogue ids and the seed, not on
/// the order of `pool`. Selected dialogues keep their pool order.
pub fn sample_split(pool: &[Dialogue], ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::argument(format!("ratio {ratio} outside (0, 1]")));
    }
    let k = sample_size(ratio, pool.len());

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[a].dialogue_id.cmp(&pool[b].dialogue_id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; pool.len()];
    for i in rand::seq::index::sample(&mut rng, pool.len(), k) {
        chosen[order[i]] = true;
    }

    let mut train = Vec::with_capacity(k);
    let mut unlabeled = Vec::with_capacity(pool.len() - k);
    for (d, picked) in pool.iter().zip(chosen) {
        if picked {
            train.push(d.clone());
        } else {
            unlabeled.push(d.stripped());
        }
    }
    Ok(CorpusSplit {
        train,
        unlabeled,
        valid: Vec::new(),
        test: Vec::new(),
        ratio,
        seed,
    })
}

/// Turn-level training examples in the labeled part of a split.
pub fn turn_example_count(split: &CorpusSplit) -> usize {
    split.train.iter().map(|d| d.turns.len()).sum()
}
