//! Reader for the MultiWOZ 2.1 distribution layout.
//!
//! `data.json` maps dialogue file names to `{goal, log}`. Even log entries are
//! user utterances; odd entries are system responses whose `metadata` holds
//! the cumulative state after the preceding user utterance. Validation and
//! test membership come from `valListFile.txt` / `testListFile.txt` (the
//! `.json` spellings are accepted too); dialogues in neither list form the
//! training portion.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use tracing::warn;

use crate::error::{Error, Result};
use crate::normalize::{normalize_text, normalize_value, SubstitutionTable};
use crate::statecore::BeliefState;

use super::{Dialogue, DialogueTurn, KNOWN_DOMAINS};

pub const DATA_FILE: &str = "data.json";
const VALID_LISTS: [&str; 2] = ["valListFile.txt", "valListFile.json"];
const TEST_LISTS: [&str; 2] = ["testListFile.txt", "testListFile.json"];

#[derive(Debug, Clone, Default)]
pub struct MultiWozCorpus {
    pub train: Vec<Dialogue>,
    pub valid: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl MultiWozCorpus {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Read a MultiWOZ 2.1 directory, keeping only `domain_filter` domains.
///
/// Dialogues whose domains all fall outside the filter are dropped; slots
/// of excluded domains are removed from the states. Values are normalized
/// with the built-in substitution table, and a slot that disappears from a
/// later cumulative state is carried forward so states only ever grow.
pub fn ingest(corpus_root: &Path, domain_filter: &BTreeSet<String>) -> Result<MultiWozCorpus> {
    let data_path = corpus_root.join(DATA_FILE);
    let raw = fs::read_to_string(&data_path)
        .map_err(|e| Error::data(&data_path, format!("cannot read corpus file: {e}")))?;
    let parsed: Map<String, Value> = serde_json::from_str(&raw)
        .map_err(|e| Error::data(&data_path, format!("unparseable corpus file: {e}")))?;

    let valid_ids = read_id_list(corpus_root, &VALID_LISTS)?;
    let test_ids = read_id_list(corpus_root, &TEST_LISTS)?;
    let table = SubstitutionTable::builtin();

    let mut corpus = MultiWozCorpus::default();
    for (file_name, body) in &parsed {
        let Some(dialogue) = parse_dialogue(file_name, body, domain_filter, table)
            .map_err(|msg| Error::data(&data_path, format!("{file_name}: {msg}")))?
        else {
            continue;
        };
        let bucket = if valid_ids.contains(file_name) {
            &mut corpus.valid
        } else if test_ids.contains(file_name) {
            &mut corpus.test
        } else {
            &mut corpus.train
        };
        bucket.push(dialogue);
    }
    Ok(corpus)
}

fn read_id_list(root: &Path, candidates: &[&str]) -> Result<HashSet<String>> {
    let Some(path) = candidates
        .iter()
        .map(|name| root.join(name))
        .find(|p| p.exists())
    else {
        return Ok(HashSet::new());
    };
    let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(parse_id_list(&raw))
}

fn parse_id_list(raw: &str) -> HashSet<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_dialogue(
    file_name: &str,
    body: &Value,
    domain_filter: &BTreeSet<String>,
    table: &SubstitutionTable,
) -> std::result::Result<Option<Dialogue>, String> {
    let log = body
        .get("log")
        .and_then(Value::as_array)
        .ok_or("missing `log` array")?;

    let mut mentioned: BTreeSet<String> = BTreeSet::new();
    if let Some(goal) = body.get("goal").and_then(Value::as_object) {
        for (domain, constraints) in goal {
            let non_empty = constraints.as_object().is_some_and(|o| !o.is_empty());
            if non_empty && KNOWN_DOMAINS.contains(&domain.as_str()) {
                mentioned.insert(domain.clone());
            }
        }
    }

    let mut turns = Vec::with_capacity(log.len() / 2);
    let mut carried = BeliefState::new();
    for pair in 0..log.len() / 2 {
        let user = &log[2 * pair];
        let system_reply = &log[2 * pair + 1];
        let system_text = if pair == 0 {
            ""
        } else {
            text_of(&log[2 * pair - 1]).ok_or("log entry without `text`")?
        };
        let user_text = text_of(user).ok_or("log entry without `text`")?;
        let metadata = system_reply
            .get("metadata")
            .and_then(Value::as_object)
            .ok_or_else(|| format!("log entry {} has no metadata", 2 * pair + 1))?;

        let raw_state = parse_state(file_name, metadata, domain_filter, table, &mut mentioned);
        let mut state = carried.clone();
        for (slot, value) in raw_state.iter() {
            state.insert(slot, value);
        }
        carried = state.clone();

        turns.push(DialogueTurn::new(pair as u32 + 1, system_text, user_text).with_state(state));
    }
    if log.len() % 2 == 1 && !log.is_empty() {
        warn!(
            dialogue = file_name,
            "trailing user utterance without state dropped"
        );
    }

    let domains: BTreeSet<String> = mentioned
        .into_iter()
        .filter(|d| domain_filter.contains(d))
        .collect();
    if domains.is_empty() || turns.is_empty() {
        return Ok(None);
    }
    Ok(Some(Dialogue {
        dialogue_id: file_name.to_string(),
        turns,
        domains,
    }))
}

fn text_of(entry: &Value) -> Option<&str> {
    entry.get("text").and_then(Value::as_str)
}

fn parse_state(
    file_name: &str,
    metadata: &Map<String, Value>,
    domain_filter: &BTreeSet<String>,
    table: &SubstitutionTable,
    mentioned: &mut BTreeSet<String>,
) -> BeliefState {
    let mut state = BeliefState::new();
    for (domain, body) in metadata {
        let domain = normalize_text(domain);
        if !KNOWN_DOMAINS.contains(&domain.as_str()) {
            warn!(dialogue = file_name, domain = %domain, "unknown domain in annotations, slots dropped");
            continue;
        }
        let Some(body) = body.as_object() else {
            continue;
        };
        let mut any = false;
        for (section, prefix) in [("semi", ""), ("book", "book ")] {
            let Some(slots) = body.get(section).and_then(Value::as_object) else {
                continue;
            };
            for (slot, raw) in slots {
                if slot == "booked" {
                    continue;
                }
                let raw = match raw {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    _ => continue,
                };
                let Some(value) = normalize_value(&raw, table) else {
                    continue;
                };
                any = true;
                if domain_filter.contains(&domain) {
                    state.insert(format!("{domain}-{prefix}{}", normalize_text(slot)), value);
                }
            }
        }
        if any {
            mentioned.insert(domain);
        }
    }
    state
}
