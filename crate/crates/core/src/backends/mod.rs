//! Model backends for value generation, value estimation and slot
//! generation.
//!
//! [`RemoteBackend`] talks to a model server over HTTP. [`OracleBackend`]
//! answers from gold labels and [`NoisyBackend`] perturbs those answers with
//! a seeded noise model; both make the full pipeline runnable without models.

mod noisy;
mod oracle;
mod remote;
pub mod rng;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::error::{Error, Result};
use crate::prompting::{EstimatorInput, GeneratorInput};
use crate::statecore::{TurnLabel, TurnRef, ValueSet};

pub use noisy::{NoiseProfile, NoisyBackend};
pub use oracle::OracleBackend;
pub use remote::{RemoteBackend, RetryPolicy};

/// Slot answer when a value has no gold domain-slot.
pub const UNKNOWN_SLOT: &str = "unknown-slot";

/// Tolerance on the probability sum of a verdict.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictClass {
    Correct,
    Incomplete,
    Incorrect,
}

impl VerdictClass {
    pub const ALL: [VerdictClass; 3] = [
        VerdictClass::Correct,
        VerdictClass::Incomplete,
        VerdictClass::Incorrect,
    ];

    /// Integer label used in estimator training records.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    /// Classify a candidate value set against gold.
    ///
    /// Equal sets are correct; a proper subset (missing values, nothing
    /// extra) is incomplete; anything with a non-gold value is incorrect.
    pub fn judge(candidate: &ValueSet, gold: &ValueSet) -> Self {
        if candidate.same_set(gold) {
            VerdictClass::Correct
        } else if candidate.is_subset_of(gold) {
            VerdictClass::Incomplete
        } else {
            VerdictClass::Incorrect
        }
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VerdictClass::Correct => "correct",
            VerdictClass::Incomplete => "incomplete",
            VerdictClass::Incorrect => "incorrect",
        };
        f.write_str(name)
    }
}

/// Probability distribution over the three generation outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorVerdict {
    pub p_correct: f64,
    pub p_incomplete: f64,
    pub p_incorrect: f64,
}

impl EstimatorVerdict {
    pub fn new(p_correct: f64, p_incomplete: f64, p_incorrect: f64) -> Result<Self, String> {
        let v = Self {
            p_correct,
            p_incomplete,
            p_incorrect,
        };
        v.check()?;
        Ok(v)
    }

    pub fn one_hot(class: VerdictClass) -> Self {
        Self::with_confidence(class, 1.0)
    }

    /// `confidence` on `class`, the remainder split evenly between the others.
    pub fn with_confidence(class: VerdictClass, confidence: f64) -> Self {
        let rest = (1.0 - confidence) / 2.0;
        let mut p = [rest; 3];
        p[class.index() as usize] = confidence;
        Self {
            p_correct: p[0],
            p_incomplete: p[1],
            p_incorrect: p[2],
        }
    }

    /// Every probability in [0, 1] and the sum within [`SIMPLEX_TOLERANCE`] of 1.
    pub fn check(&self) -> Result<(), String> {
        let p = self.probabilities();
        if p.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(format!("probabilities outside [0, 1]: {p:?}"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(format!("probabilities sum to {sum}"));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> [f64; 3] {
        [self.p_correct, self.p_incomplete, self.p_incorrect]
    }

    pub fn probability(&self, class: VerdictClass) -> f64 {
        self.probabilities()[class.index() as usize]
    }

    /// Most probable class; ties resolve to the earlier class.
    pub fn argmax(&self) -> VerdictClass {
        let p = self.probabilities();
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        VerdictClass::ALL[best]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Health {
    Healthy { model: String },
    Degraded { cause: String },
}

impl Health {
    pub fn is_healthy(&self) -> bool {
        matches!(self, Health::Healthy { .. })
    }
}

/// The three inference interfaces. Implementations must tolerate concurrent
/// calls from many worker threads.
///
/// Structured arguments next to the prompt (`candidate`, `value`) are what
/// the prompt encodes; local backends read them instead of parsing text.
pub trait Backend: Send + Sync {
    fn name(&self) -> String;

    fn generate_values(&self, input: &GeneratorInput, turn: &TurnRef) -> Result<ValueSet>;

    fn estimate_values(
        &self,
        input: &EstimatorInput,
        candidate: &ValueSet,
        turn: &TurnRef,
    ) -> Result<EstimatorVerdict>;

    /// Domain-slot for `value`. When a value fills several slots of the turn
    /// the answer lists them separated by `" | "`.
    fn generate_slot(&self, forward_prompt: &str, value: &str, turn: &TurnRef) -> Result<String>;

    fn health_check(&self) -> Health;
}

pub type SharedBackend = Arc<dyn Backend>;

#[derive(Debug, Clone)]
pub struct GoldTurn {
    pub values: ValueSet,
    pub label: TurnLabel,
    /// Gold values of all earlier turns of the dialogue.
    pub prior_values: ValueSet,
}

/// Gold answers for every labeled turn, keyed by turn reference.
#[derive(Debug, Clone, Default)]
pub struct GoldIndex {
    turns: HashMap<TurnRef, GoldTurn>,
    slots: Vec<String>,
}

impl GoldIndex {
    /// Index every turn that carries a derived turn label.
    pub fn from_dialogues<'a, I>(dialogues: I) -> Self
    where
        I: IntoIterator<Item = &'a Dialogue>,
    {
        let mut turns = HashMap::new();
        let mut slots = std::collections::BTreeSet::new();
        for d in dialogues {
            let mut prior = ValueSet::default();
            for t in &d.turns {
                let Some(label) = &t.gold_turn_label else {
                    continue;
                };
                let values = label.values();
                slots.extend(label.pairs().iter().map(|(s, _)| s.clone()));
                turns.insert(
                    TurnRef::new(d.dialogue_id.clone(), t.turn_index),
                    GoldTurn {
                        values: values.clone(),
                        label: label.clone(),
                        prior_values: prior.clone(),
                    },
                );
                prior = prior.union(&values);
            }
        }
        Self {
            turns,
            slots: slots.into_iter().collect(),
        }
    }

    pub fn get(&self, turn: &TurnRef) -> Result<&GoldTurn> {
        self.turns
            .get(turn)
            .ok_or_else(|| Error::argument(format!("no gold label for turn {turn}")))
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Every domain-slot seen in gold labels, sorted.
    pub fn slot_vocabulary(&self) -> &[String] {
        &self.slots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Oracle,
    Noisy,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_concurrency() -> usize {
    8
}

/// Serializable description of a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<NoiseProfile>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

impl BackendDescriptor {
    pub fn oracle() -> Self {
        Self {
            kind: BackendKind::Oracle,
            endpoint: None,
            profile: None,
            timeout_ms: default_timeout_ms(),
            max_concurrency: default_concurrency(),
        }
    }

    pub fn noisy(profile: NoiseProfile) -> Self {
        Self {
            kind: BackendKind::Noisy,
            profile: Some(profile),
            ..Self::oracle()
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::oracle()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<()> {
        let has_endpoint = self.endpoint.is_some();
        if has_endpoint != (self.kind == BackendKind::Remote) {
            return Err(Error::argument(
                "backend endpoint must be set exactly when kind = remote",
            ));
        }
        if self.profile.is_some() != (self.kind == BackendKind::Noisy) {
            return Err(Error::argument(
                "backend noise profile must be set exactly when kind = noisy",
            ));
        }
        if let Some(p) = &self.profile {
            p.validate()?;
        }
        if self.max_concurrency == 0 {
            return Err(Error::argument("backend max_concurrency must be positive"));
        }
        if self.timeout_ms == 0 {
            return Err(Error::argument("backend timeout must be positive"));
        }
        Ok(())
    }

    /// Instantiate. Local kinds answer from `gold`.
    pub fn build(&self, gold: &Arc<GoldIndex>) -> Result<SharedBackend> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Oracle => Arc::new(OracleBackend::new(gold.clone())),
            BackendKind::Noisy => Arc::new(NoisyBackend::new(
                gold.clone(),
                self.profile.clone().expect("validated"),
            )),
            BackendKind::Remote => Arc::new(RemoteBackend::new(
                self.endpoint.as_deref().expect("validated"),
                self.timeout(),
                self.max_concurrency,
                RetryPolicy::default(),
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judge_classes() {
        let gold = ValueSet::new(["saturday", "11:45", "1"]);
        assert_eq!(
            VerdictClass::judge(&gold.clone(), &gold),
            VerdictClass::Correct
        );
        assert_eq!(
            VerdictClass::judge(&ValueSet::new(["saturday", "11:45"]), &gold),
            VerdictClass::Incomplete
        );
        assert_eq!(
            VerdictClass::judge(
                &ValueSet::new(["milton country park"]),
                &ValueSet::new(["cambridge"])
            ),
            VerdictClass::Incorrect
        );
        // missing and extra at once
        assert_eq!(
            VerdictClass::judge(&ValueSet::new(["saturday", "2"]), &gold),
            VerdictClass::Incorrect
        );
        assert_eq!(
            VerdictClass::judge(&ValueSet::default(), &ValueSet::default()),
            VerdictClass::Correct
        );
    }

    #[test]
    fn verdict_simplex() {
        assert!(EstimatorVerdict::new(0.99, 0.01, 0.0).is_ok());
        assert!(EstimatorVerdict::new(0.5, 0.5, 0.1).is_err());
        assert!(EstimatorVerdict::new(1.2, -0.2, 0.0).is_err());
        assert!(EstimatorVerdict::new(f64::NAN, 0.5, 0.5).is_err());
        let v = EstimatorVerdict::with_confidence(VerdictClass::Incorrect, 0.9);
        assert!(v.check().is_ok());
        assert_eq!(v.argmax(), VerdictClass::Incorrect);
        assert_eq!(
            EstimatorVerdict::new(0.08, 0.92, 0.0).unwrap().argmax(),
            VerdictClass::Incomplete
        );
    }

    #[test]
    fn descriptor_validation() {
        assert!(BackendDescriptor::oracle().validate().is_ok());
        assert!(BackendDescriptor::remote("http://localhost:1")
            .validate()
            .is_ok());
        let mut bad = BackendDescriptor::oracle();
        bad.endpoint = Some("http://x".into());
        assert!(bad.validate().is_err());
        let mut remote = BackendDescriptor::remote("http://x");
        remote.endpoint = None;
        assert!(remote.validate().is_err());
        let noisy = BackendDescriptor {
            kind: BackendKind::Noisy,
            ..BackendDescriptor::oracle()
        };
        assert!(noisy.validate().is_err());
    }

    #[test]
    fn descriptor_rejects_unknown_keys() {
        let err = serde_json::from_str::<BackendDescriptor>(r#"{"kind":"oracle","bogus":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn class_indices() {
        for c in VerdictClass::ALL {
            assert_eq!(VerdictClass::from_index(c.index()), Some(c));
        }
        assert_eq!(VerdictClass::from_index(3), None);
    }
}
