//! Estimator training data by perturbing gold value sets.
//!
//! Every labeled turn yields its gold set (correct), gold with some values
//! removed (incomplete) and gold plus a value seen earlier in the dialogue
//! (incorrect).

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::rng::{turn_rng, turn_seed};
use crate::backends::VerdictClass;
use crate::corpus::Dialogue;
use crate::error::{Error, Result};
use crate::prompting::{build_estimator_input, PromptConfig, TurnContext};
use crate::statecore::{TurnRef, ValueSet};

const SAMPLE_SALT: u64 = 0x6e65_6773;
const SLICE_SALT: u64 = 0x736c_6963;

/// Share of source turns held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorExample {
    pub turn: TurnRef,
    pub candidate: ValueSet,
    pub label: VerdictClass,
}

impl EstimatorExample {
    /// Whether the candidate stands in the relation its label claims.
    pub fn is_sound(&self, gold: &ValueSet) -> bool {
        VerdictClass::judge(&self.candidate, gold) == self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerTurnCounts {
    pub correct: u32,
    pub incomplete: u32,
    pub incorrect: u32,
}

impl Default for PerTurnCounts {
    fn default() -> Self {
        Self {
            correct: 1,
            incomplete: 2,
            incorrect: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub per_turn_counts: PerTurnCounts,
    pub global_pool_fallback: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            per_turn_counts: PerTurnCounts::default(),
            global_pool_fallback: true,
            seed: 0,
        }
    }
}

/// Remove `k` values from `gold`, `k` uniform in `[1, |gold|]`.
pub fn synth_incomplete<R: Rng + ?Sized>(gold: &ValueSet, rng: &mut R) -> Result<ValueSet> {
    let n = gold.len();
    if n == 0 {
        return Err(Error::argument(
            "cannot derive an incomplete sample from an empty value set",
        ));
    }
    let k = rng.random_range(1..=n);
    let mut removed = vec![false; n];
    for i in index::sample(rng, n, k) {
        removed[i] = true;
    }
    Ok(gold
        .iter()
        .zip(removed)
        .filter(|(_, r)| !r)
        .map(|(v, _)| v)
        .collect())
}

/// Gold plus one non-gold value from earlier turns, or from the global pool
/// when earlier turns offer none and fallback is on. `None` means no
/// candidate exists and the sample should be skipped.
pub fn synth_incorrect<R: Rng + ?Sized>(
    gold: &ValueSet,
    prior_turn_values: &ValueSet,
    global_pool: &ValueSet,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Option<ValueSet> {
    let mut candidates = prior_turn_values.difference(gold);
    if candidates.is_empty() && cfg.global_pool_fallback {
        candidates = global_pool.difference(gold);
    }
    if candidates.is_empty() {
        return None;
    }
    let pick = &candidates.as_slice()[rng.random_range(0..candidates.len())];
    let mut out = gold.clone();
    out.push(pick);
    Some(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorDataset {
    pub train: Vec<EstimatorExample>,
    pub valid: Vec<EstimatorExample>,
}

impl EstimatorDataset {
    pub fn label_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for e in self.train.iter().chain(&self.valid) {
            h[e.label.index() as usize] += 1;
        }
        h
    }
}

fn turn_examples(
    turn: &TurnRef,
    gold: &ValueSet,
    prior: &ValueSet,
    pool: &ValueSet,
    cfg: &SamplerConfig,
) -> Vec<EstimatorExample> {
    let mut rng = turn_rng(cfg.seed, turn, SAMPLE_SALT);
    let counts = cfg.per_turn_counts;
    let mut out = Vec::new();
    let mut emit = |candidate, label| {
        out.push(EstimatorExample {
            turn: turn.clone(),
            candidate,
            label,
        })
    };
    for _ in 0..counts.correct {
        emit(gold.clone(), VerdictClass::Correct);
    }
    if !gold.is_empty() {
        for _ in 0..counts.incomplete {
            let c = synth_incomplete(gold, &mut rng).expect("gold is non-empty");
            emit(c, VerdictClass::Incomplete);
        }
    }
    for _ in 0..counts.incorrect {
        if let Some(c) = synth_incorrect(gold, prior, pool, &mut rng, cfg) {
            emit(c, VerdictClass::Incorrect);
        }
    }
    out
}

/// Turns assigned to the validation slice: the 10% with the lowest seeded
/// hash, so membership is fixed by seed and independent of corpus order.
fn validation_turns(turns: &[TurnRef], seed: u64) -> std::collections::HashSet<TurnRef> {
    let n_valid = (turns.len() as f64 * VALIDATION_FRACTION).round() as usize;
    let mut ranked: Vec<(u64, &TurnRef)> = turns
        .iter()
        .map(|t| (turn_seed(seed, t, SLICE_SALT), t))
        .collect();
    ranked.sort();
    ranked
        .into_iter()
        .take(n_valid)
        .map(|(_, t)| t.clone())
        .collect()
}

/// Build training and validation examples from labeled dialogues.
///
/// Unlabeled turns are ignored.
pub fn synth_dataset(dialogues: &[Dialogue], cfg: &SamplerConfig) -> EstimatorDataset {
    let pool: ValueSet = dialogues
        .iter()
        .flat_map(|d| d.turns.iter())
        .filter_map(|t| t.gold_turn_label.as_ref())
        .flat_map(|l| l.values().as_slice().to_vec())
        .collect();

    let per_dialogue: Vec<Vec<EstimatorExample>> = dialogues
        .par_iter()
        .map(|d| {
            let mut prior = ValueSet::default();
            let mut out = Vec::new();
            for t in &d.turns {
                let Some(label) = &t.gold_turn_label else {
                    continue;
                };
                let gold = label.values();
                let turn = TurnRef::new(d.dialogue_id.clone(), t.turn_index);
                out.extend(turn_examples(&turn, &gold, &prior, &pool, cfg));
                prior = prior.union(&gold);
            }
            out
        })
        .collect();

    let source_turns: Vec<TurnRef> = dialogues
        .iter()
        .flat_map(|d| {
            d.turns
                .iter()
                .filter(|t| t.gold_turn_label.is_some())
                .map(|t| TurnRef::new(d.dialogue_id.clone(), t.turn_index))
        })
        .collect();
    let valid_turns = validation_turns(&source_turns, cfg.seed);

    let mut dataset = EstimatorDataset::default();
    for e in per_dialogue.into_iter().flatten() {
        if valid_turns.contains(&e.turn) {
            dataset.valid.push(e);
        } else {
            dataset.train.push(e);
        }
    }
    dataset
}

/// One line of an estimator training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorRecord {
    pub input: String,
    pub label: u8,
}

/// Render examples as trainer records, using each turn's dialogue context.
pub fn to_records(
    dialogues: &[Dialogue],
    examples: &[EstimatorExample],
    cfg: &PromptConfig,
) -> Result<Vec<EstimatorRecord>> {
    let by_id: HashMap<&str, &Dialogue> = dialogues
        .iter()
        .map(|d| (d.dialogue_id.as_str(), d))
        .collect();
    examples
        .par_iter()
        .map(|e| {
            let d = by_id
                .get(e.turn.dialogue_id.as_str())
                .ok_or_else(|| Error::argument(format!("no dialogue for turn {}", e.turn)))?;
            let pos = d
                .position_of(e.turn.turn_index)
                .ok_or_else(|| Error::argument(format!("no such turn {}", e.turn)))?;
            let input = build_estimator_input(&TurnContext::at(d, pos), &e.candidate, cfg);
            Ok(EstimatorRecord {
                input: input.text,
                label: e.label.index(),
            })
        })
        .collect()
}
