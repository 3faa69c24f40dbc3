//! Text and slot-value normalization shared by ingestion, decoding and metrics.

use std::collections::HashMap;
use std::sync::OnceLock;

/// Values that mark a slot as not filled.
pub const ABSENT_MARKERS: [&str; 3] = ["", "none", "not mentioned"];

const DEFAULT_SUBSTITUTIONS: &str = include_str!("../data/value_substitutions.json");

/// Lowercase, trim and collapse internal whitespace runs to a single space.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

pub fn is_absent(normalized: &str) -> bool {
    ABSENT_MARKERS.contains(&normalized)
}

/// Fixed value substitution table used to canonicalize known annotation
/// variants (e.g. "guesthouse" and "guest house").
///
/// Lookups are exact matches on the whole normalized value; there is no
/// fuzzy matching.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubstitutionTable {
    entries: HashMap<String, String>,
}

impl SubstitutionTable {
    pub fn from_json(raw: &str) -> serde_json::Result<Self> {
        let parsed: HashMap<String, String> = serde_json::from_str(raw)?;
        let entries = parsed
            .into_iter()
            .map(|(k, v)| (normalize_text(&k), normalize_text(&v)))
            .collect();
        Ok(Self { entries })
    }

    /// The table shipped with the crate.
    pub fn builtin() -> &'static SubstitutionTable {
        static TABLE: OnceLock<SubstitutionTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SubstitutionTable::from_json(DEFAULT_SUBSTITUTIONS)
                .expect("bundled substitution table is valid json")
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Apply the table to an already text-normalized value.
    pub fn canonical<'a>(&'a self, normalized: &'a str) -> &'a str {
        self.entries
            .get(normalized)
            .map(String::as_str)
            .unwrap_or(normalized)
    }
}

/// Normalize a raw annotated slot value.
///
/// Returns `None` when the value is an absent marker. Annotations carrying
/// several alternatives separated by `|` keep the first non-empty one.
pub fn normalize_value(raw: &str, table: &SubstitutionTable) -> Option<String> {
    let first = raw
        .split('|')
        .map(normalize_text)
        .find(|alt| !alt.is_empty())
        .unwrap_or_default();
    if is_absent(&first) {
        return None;
    }
    let canonical = table.canonical(&first).to_string();
    if is_absent(&canonical) {
        None
    } else {
        Some(canonical)
    }
}
