use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompting::{EstimatorInput, GeneratorInput};
use crate::statecore::{encode_values, TurnRef, ValueSet};

use super::rng::{fnv1a64, turn_rng};
use super::{
    Backend, EstimatorVerdict, GoldIndex, Health, OracleBackend, VerdictClass, UNKNOWN_SLOT,
};

const SALT_VALUES: u64 = 0x76616c75;
const SALT_ESTIMATE: u64 = 0x65737469;
const SALT_SLOT: u64 = 0x736c6f74;

/// Lowest confidence of an unflipped verdict on a non-blank candidate.
pub const CONFIDENT_FLOOR: f64 = 0.98;
/// Lowest confidence of a flipped verdict.
pub const FLIPPED_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    /// Drop each gold value independently.
    pub drop_prob: f64,
    /// Inject one value mentioned in an earlier turn.
    pub inject_prob: f64,
    /// Estimator (and slot generator) answers with a wrong class.
    pub flip_verdict_prob: f64,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            drop_prob: 0.0,
            inject_prob: 0.0,
            flip_verdict_prob: 0.0,
            seed: 0,
        }
    }
}

impl NoiseProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("inject_prob", self.inject_prob),
            ("flip_verdict_prob", self.flip_verdict_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::argument(format!("noise {name}={p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Gold answers perturbed by a seeded noise model.
///
/// Values: each gold value is dropped with `drop_prob`; then with
/// `inject_prob` one earlier-turn value outside gold is added.
///
/// Verdicts: the oracle class is replaced by one of the two others with
/// `flip_verdict_prob`. An unflipped verdict puts confidence 1 on a blank
/// candidate and uniform confidence in (0.98, 1] on a non-blank one; a
/// flipped verdict puts uniform confidence in [0.5, 0.98) on its wrong
/// class. The remainder is split evenly between the other two classes.
///
/// Slots: with `flip_verdict_prob` a non-gold slot from the gold
/// vocabulary is returned instead.
///
/// All draws come from per-turn streams, see [`super::rng`].
#[derive(Debug, Clone)]
pub struct NoisyBackend {
    oracle: OracleBackend,
    profile: NoiseProfile,
}

impl NoisyBackend {
    pub fn new(gold: Arc<GoldIndex>, profile: NoiseProfile) -> Self {
        Self {
            oracle: OracleBackend::new(gold),
            profile,
        }
    }

    pub fn profile(&self) -> &NoiseProfile {
        &self.profile
    }

    fn candidate_salt(candidate: &ValueSet) -> u64 {
        let key = encode_values(candidate).unwrap_or_else(|_| candidate.as_slice().join("\u{1f}"));
        fnv1a64(key.as_bytes())
    }
}

impl Backend for NoisyBackend {
    fn name(&self) -> String {
        format!(
            "noisy(drop={}, inject={}, flip={}, seed={})",
            self.profile.drop_prob,
            self.profile.inject_prob,
            self.profile.flip_verdict_prob,
            self.profile.seed
        )
    }

    fn generate_values(&self, _input: &GeneratorInput, turn: &TurnRef) -> Result<ValueSet> {
        let gold = self.oracle.gold().get(turn)?;
        let mut rng = turn_rng(self.profile.seed, turn, SALT_VALUES);
        let mut out = ValueSet::default();
        for v in gold.values.iter() {
            if !rng.random_bool(self.profile.drop_prob) {
                out.push(v);
            }
        }
        if rng.random_bool(self.profile.inject_prob) {
            let candidates = gold.prior_values.difference(&gold.values);
            if let Some(extra) = candidates.as_slice().choose(&mut rng) {
                out.push(extra);
            }
        }
        Ok(out)
    }

    fn estimate_values(
        &self,
        input: &EstimatorInput,
        candidate: &ValueSet,
        turn: &TurnRef,
    ) -> Result<EstimatorVerdict> {
        let truth = self
            .oracle
            .estimate_values(input, candidate, turn)?
            .argmax();
        let mut rng = turn_rng(
            self.profile.seed,
            turn,
            SALT_ESTIMATE ^ Self::candidate_salt(candidate),
        );
        let flipped = rng.random_bool(self.profile.flip_verdict_prob);
        let u: f64 = rng.random();
        let (class, confidence) = if flipped {
            let others: Vec<VerdictClass> = VerdictClass::ALL
                .into_iter()
                .filter(|c| *c != truth)
                .collect();
            let class = *others.choose(&mut rng).expect("two other classes");
            (class, FLIPPED_FLOOR + (CONFIDENT_FLOOR - FLIPPED_FLOOR) * u)
        } else if candidate.is_empty() {
            (truth, 1.0)
        } else {
            (truth, 1.0 - (1.0 - CONFIDENT_FLOOR) * u)
        };
        Ok(EstimatorVerdict::with_confidence(class, confidence))
    }

    fn generate_slot(&self, forward_prompt: &str, value: &str, turn: &TurnRef) -> Result<String> {
        let answer = self.oracle.generate_slot(forward_prompt, value, turn)?;
        let mut rng = turn_rng(
            self.profile.seed,
            turn,
            SALT_SLOT ^ fnv1a64(value.as_bytes()),
        );
        if !rng.random_bool(self.profile.flip_verdict_prob) {
            return Ok(answer);
        }
        let gold_slots = self.oracle.gold_slots(value, turn)?;
        let wrong: Vec<&String> = self
            .oracle
            .gold()
            .slot_vocabulary()
            .iter()
            .filter(|s| !gold_slots.contains(s))
            .collect();
        Ok(wrong
            .choose(&mut rng)
            .map(|s| s.to_string())
            .unwrap_or_else(|| UNKNOWN_SLOT.to_string()))
    }

    fn health_check(&self) -> Health {
        Health::Healthy { model: self.name() }
    }
}
