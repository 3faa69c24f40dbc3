//! Belief-state algebra and the value-set codec.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::{is_absent, normalize_text};

/// Separator used when a value set is linearized into one string.
pub const VALUE_DELIMITER: &str = " | ";

/// Identifies one turn of one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TurnRef {
    pub dialogue_id: String,
    pub turn_index: u32,
}

impl TurnRef {
    pub fn new(dialogue_id: impl Into<String>, turn_index: u32) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            turn_index,
        }
    }
}

impl fmt::Display for TurnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.dialogue_id, self.turn_index)
    }
}

/// Domain of a `domain-slot` key (`"hotel-area"` -> `"hotel"`).
pub fn domain_of(domain_slot: &str) -> &str {
    domain_slot.split('-').next().unwrap_or(domain_slot)
}

/// Accumulated map from domain-slot to value at a dialogue turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState {
    entries: BTreeMap<String, String>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, domain_slot: &str) -> Option<&str> {
        self.entries.get(domain_slot).map(String::as_str)
    }

    /// Insert a pair. Absent-marker values are ignored so the state never
    /// holds an unfilled slot.
    pub fn insert(&mut self, domain_slot: impl Into<String>, value: impl Into<String>) {
        let value = value.into();
        if is_absent(&value) {
            return;
        }
        self.entries.insert(domain_slot.into(), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn domains(&self) -> BTreeSet<String> {
        self.entries
            .keys()
            .map(|k| domain_of(k).to_string())
            .collect()
    }

    /// Entries whose key belongs to `domain`.
    pub fn restricted_to(&self, domain: &str) -> BeliefState {
        let entries = self
            .entries
            .iter()
            .filter(|(k, _)| domain_of(k) == domain)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        BeliefState { entries }
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for BeliefState {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut state = BeliefState::new();
        for (k, v) in iter {
            state.insert(k, v);
        }
        state
    }
}

/// The `(domain-slot, value)` pairs introduced or changed at one turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct TurnLabel {
    pairs: Vec<(String, String)>,
}

impl TurnLabel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a pair; a repeated domain-slot replaces the earlier value in place.
    pub fn insert(&mut self, domain_slot: impl Into<String>, value: impl Into<String>) {
        let domain_slot = domain_slot.into();
        let value = value.into();
        match self.pairs.iter_mut().find(|(s, _)| *s == domain_slot) {
            Some(existing) => existing.1 = value,
            None => self.pairs.push((domain_slot, value)),
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The turn's value set, in label order with duplicates removed.
    pub fn values(&self) -> ValueSet {
        ValueSet::new(self.pairs.iter().map(|(_, v)| v.as_str()))
    }

    /// Every domain-slot paired with `value`, in label order.
    pub fn slots_for<'a>(&'a self, value: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pairs
            .iter()
            .filter(move |(_, v)| v == value)
            .map(|(s, _)| s.as_str())
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for TurnLabel {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut label = TurnLabel::new();
        for (k, v) in iter {
            label.insert(k, v);
        }
        label
    }
}

impl From<Vec<(String, String)>> for TurnLabel {
    fn from(pairs: Vec<(String, String)>) -> Self {
        pairs.into_iter().collect()
    }
}

impl From<TurnLabel> for Vec<(String, String)> {
    fn from(label: TurnLabel) -> Self {
        label.pairs
    }
}

/// Ordered, duplicate-free set of normalized state values.
///
/// Members are text-normalized on insertion; empty strings and absent
/// markers are dropped. Equality via `==` is order-sensitive; use
/// [`ValueSet::same_set`] for set comparison.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ValueSet {
    values: Vec<String>,
}

impl ValueSet {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = ValueSet::default();
        for v in values {
            set.push(v.as_ref());
        }
        set
    }

    /// Append a value unless it is blank, absent or already present.
    pub fn push(&mut self, value: &str) -> bool {
        let value = normalize_text(value);
        if is_absent(&value) || self.values.contains(&value) {
            return false;
        }
        self.values.push(value);
        true
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.values
    }

    /// Order-insensitive equality.
    pub fn same_set(&self, other: &ValueSet) -> bool {
        self.len() == other.len() && self.iter().all(|v| other.contains(v))
    }

    pub fn is_subset_of(&self, other: &ValueSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    /// Members of `self` not in `other`, preserving order.
    pub fn difference(&self, other: &ValueSet) -> ValueSet {
        ValueSet {
            values: self
                .values
                .iter()
                .filter(|v| !other.contains(v))
                .cloned()
                .collect(),
        }
    }

    pub fn union(&self, other: &ValueSet) -> ValueSet {
        let mut out = self.clone();
        for v in other.iter() {
            out.push(v);
        }
        out
    }
}

impl From<Vec<String>> for ValueSet {
    fn from(values: Vec<String>) -> Self {
        ValueSet::new(values)
    }
}

impl From<ValueSet> for Vec<String> {
    fn from(set: ValueSet) -> Self {
        set.values
    }
}

impl<S: AsRef<str>> FromIterator<S> for ValueSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ValueSet::new(iter)
    }
}

/// Apply a turn label to a prior belief state.
///
/// Slots in the label overwrite or extend the prior; everything else carries
/// over unchanged. There is no removal path.
pub fn update_belief(prior: &BeliefState, label: &TurnLabel) -> BeliefState {
    let mut next = prior.clone();
    for (slot, value) in label.pairs() {
        next.insert(slot.as_str(), value.as_str());
    }
    next
}

/// Fold a sequence of turn labels from the empty state, returning the state
/// after every turn.
pub fn accumulate<'a, I>(labels: I) -> Vec<BeliefState>
where
    I: IntoIterator<Item = &'a TurnLabel>,
{
    let mut state = BeliefState::new();
    labels
        .into_iter()
        .map(|label| {
            state = update_belief(&state, label);
            state.clone()
        })
        .collect()
}

/// Linearize a value set as `v1 | v2 | ... | vn`.
pub fn encode_values(vs: &ValueSet) -> Result<String> {
    if let Some(bad) = vs.iter().find(|v| v.contains('|')) {
        return Err(Error::Encoding {
            value: bad.to_string(),
        });
    }
    Ok(vs.as_slice().join(VALUE_DELIMITER))
}

/// Parse arbitrary generator output back into a value set. Total.
pub fn decode_values(raw: &str) -> ValueSet {
    ValueSet::new(raw.split('|'))
}
