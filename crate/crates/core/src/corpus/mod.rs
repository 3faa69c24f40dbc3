//! Dialogue corpora: ingestion, canonical turn records, turn-label
//! derivation and seeded low-resource splits.

mod labels;
mod multiwoz;
pub mod records;
mod split;
pub mod synthetic;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::statecore::{BeliefState, TurnLabel, TurnRef, ValueSet};

pub use labels::{derive_all_turn_labels, derive_turn_labels};
pub use multiwoz::{ingest, MultiWozCorpus};
pub use split::{sample_size, sample_split, turn_example_count, CorpusSplit, SplitManifest};

/// The five domains kept for evaluation.
pub const DEFAULT_DOMAINS: [&str; 5] = ["restaurant", "hotel", "attraction", "taxi", "train"];

/// Every domain that appears in MultiWOZ 2.1 annotations.
pub const KNOWN_DOMAINS: [&str; 8] = [
    "restaurant",
    "hotel",
    "attraction",
    "taxi",
    "train",
    "police",
    "hospital",
    "bus",
];

pub fn default_domain_filter() -> BTreeSet<String> {
    DEFAULT_DOMAINS.iter().map(|d| d.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

impl Utterance {
    pub fn system(text: impl AsRef<str>) -> Self {
        Self {
            speaker: Speaker::System,
            text: crate::normalize::normalize_text(text.as_ref()),
        }
    }

    pub fn user(text: impl AsRef<str>) -> Self {
        Self {
            speaker: Speaker::User,
            text: crate::normalize::normalize_text(text.as_ref()),
        }
    }
}

/// One system/user exchange. Turn 1's system utterance is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueTurn {
    pub turn_index: u32,
    pub system: Utterance,
    pub user: Utterance,
    pub gold_state: Option<BeliefState>,
    pub gold_turn_label: Option<TurnLabel>,
}

impl DialogueTurn {
    pub fn new(turn_index: u32, system: impl AsRef<str>, user: impl AsRef<str>) -> Self {
        Self {
            turn_index,
            system: Utterance::system(system),
            user: Utterance::user(user),
            gold_state: None,
            gold_turn_label: None,
        }
    }

    pub fn with_state(mut self, state: BeliefState) -> Self {
        self.gold_state = Some(state);
        self
    }

    /// Gold values of this turn, when the turn label has been derived.
    pub fn gold_values(&self) -> Option<ValueSet> {
        self.gold_turn_label.as_ref().map(TurnLabel::values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<DialogueTurn>,
    pub domains: BTreeSet<String>,
}

impl Dialogue {
    pub fn turn_ref(&self, position: usize) -> TurnRef {
        TurnRef::new(self.dialogue_id.clone(), self.turns[position].turn_index)
    }

    pub fn is_labeled(&self) -> bool {
        self.turns.iter().all(|t| t.gold_state.is_some())
    }

    /// A copy with gold states and labels removed.
    pub fn stripped(&self) -> Dialogue {
        Dialogue {
            dialogue_id: self.dialogue_id.clone(),
            turns: self
                .turns
                .iter()
                .map(|t| DialogueTurn {
                    gold_state: None,
                    gold_turn_label: None,
                    ..t.clone()
                })
                .collect(),
            domains: self.domains.clone(),
        }
    }

    /// Position of `turn_index` within `turns`.
    pub fn position_of(&self, turn_index: u32) -> Option<usize> {
        self.turns.iter().position(|t| t.turn_index == turn_index)
    }
}
