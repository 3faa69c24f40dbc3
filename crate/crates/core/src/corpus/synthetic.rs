//! Seeded generator of MultiWOZ-shaped labeled dialogues.
//!
//! Used by tests, the acceptance suite and the CLI demo when no real corpus
//! is at hand. Dialogues cover the five evaluation domains, include blank
//! turns, value changes, multi-word values and the occasional value shared by
//! two slots in the same turn.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::statecore::{accumulate, domain_of, BeliefState, TurnLabel};

use super::{Dialogue, DialogueTurn};

const DAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const AREAS: &[&str] = &["centre", "north", "south", "east", "west"];
const PRICES: &[&str] = &["cheap", "moderate", "expensive"];
const TIMES: &[&str] = &["11:45", "12:30", "09:15", "17:00", "18:45", "20:00"];
const PEOPLE: &[&str] = &["1", "2", "3", "4", "5", "6"];
const YES_NO: &[&str] = &["yes", "no"];
const PLACES: &[&str] = &[
    "cambridge",
    "london kings cross",
    "ely",
    "stevenage",
    "cafe jello gallery",
    "a and b guest house",
    "milton country park",
    "saigon city",
];

fn slot_table() -> Vec<(&'static str, &'static [&'static str])> {
    vec![
        (
            "restaurant-food",
            &["asian", "italian", "indian", "chinese", "british"][..],
        ),
        ("restaurant-area", AREAS),
        ("restaurant-pricerange", PRICES),
        (
            "restaurant-name",
            &[
                "saigon city",
                "peking restaurant",
                "the golden curry",
                "pizza hut city centre",
            ][..],
        ),
        ("restaurant-book day", DAYS),
        ("restaurant-book time", TIMES),
        ("restaurant-book people", PEOPLE),
        ("hotel-area", AREAS),
        ("hotel-pricerange", PRICES),
        ("hotel-type", &["hotel", "guest house"][..]),
        ("hotel-stars", &["2", "3", "4", "5"][..]),
        ("hotel-parking", YES_NO),
        ("hotel-internet", YES_NO),
        (
            "hotel-name",
            &[
                "a and b guest house",
                "acorn guest house",
                "allenbell",
                "the lensfield hotel",
            ][..],
        ),
        ("hotel-book day", DAYS),
        ("hotel-book people", PEOPLE),
        ("hotel-book stay", &["1", "2", "3", "4"][..]),
        (
            "attraction-type",
            &["museum", "park", "college", "nightclub"][..],
        ),
        ("attraction-area", AREAS),
        (
            "attraction-name",
            &["cafe jello gallery", "milton country park", "kings college"][..],
        ),
        ("taxi-departure", PLACES),
        ("taxi-destination", PLACES),
        ("taxi-leaveat", TIMES),
        ("taxi-arriveby", TIMES),
        (
            "train-departure",
            &["cambridge", "london kings cross", "ely", "stevenage"][..],
        ),
        (
            "train-destination",
            &["cambridge", "london kings cross", "ely", "stevenage"][..],
        ),
        ("train-day", DAYS),
        ("train-leaveat", TIMES),
        ("train-arriveby", TIMES),
        ("train-book people", PEOPLE),
    ]
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub dialogues: usize,
    pub min_turns: u32,
    pub max_turns: u32,
    /// Probability that a turn introduces no values.
    pub blank_prob: f64,
    pub dontcare_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dialogues: 50,
            min_turns: 2,
            max_turns: 8,
            blank_prob: 0.2,
            dontcare_prob: 0.05,
            seed: 0,
        }
    }
}

/// Labeled dialogues with states and turn labels filled.
pub fn generate(cfg: &SyntheticConfig) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let table = slot_table();
    let domains: Vec<&str> = super::DEFAULT_DOMAINS.to_vec();
    (0..cfg.dialogues)
        .map(|i| generate_one(&format!("SYN{i:05}.json"), cfg, &table, &domains, &mut rng))
        .collect()
}

fn generate_one(
    id: &str,
    cfg: &SyntheticConfig,
    table: &[(&'static str, &'static [&'static str])],
    all_domains: &[&str],
    rng: &mut ChaCha8Rng,
) -> Dialogue {
    let n_domains = rng.random_range(1..=2);
    let active: BTreeSet<&str> = all_domains
        .choose_multiple(rng, n_domains)
        .copied()
        .collect();
    let slots: Vec<_> = table
        .iter()
        .filter(|(s, _)| active.contains(domain_of(s)))
        .collect();
    let n_turns = rng.random_range(cfg.min_turns..=cfg.max_turns);

    let mut labels = Vec::new();
    let mut state = BeliefState::new();
    let mut texts = Vec::new();
    for _ in 0..n_turns {
        let mut label = TurnLabel::new();
        if !rng.random_bool(cfg.blank_prob) {
            let k = rng.random_range(1..=3.min(slots.len()));
            for (slot, vocab) in slots.choose_multiple(rng, k) {
                let value = if rng.random_bool(cfg.dontcare_prob) {
                    "dontcare"
                } else {
                    vocab.choose(rng).expect("non-empty vocabulary")
                };
                if state.get(slot) != Some(value) {
                    label.insert(*slot, value);
                }
            }
            // shared party size across two bookings
            if active.contains("hotel") && active.contains("restaurant") && rng.random_bool(0.15) {
                let people = PEOPLE.choose(rng).expect("non-empty");
                for slot in ["hotel-book people", "restaurant-book people"] {
                    if state.get(slot) != Some(people) {
                        label.insert(slot, *people);
                    }
                }
            }
        }
        for (s, v) in label.pairs() {
            state.insert(s.as_str(), v.as_str());
        }
        texts.push(utterances(&label, &state, rng));
        labels.push(label);
    }

    let states = accumulate(&labels);
    let turns = texts
        .into_iter()
        .zip(states)
        .zip(labels)
        .enumerate()
        .map(|(i, (((system, user), state), label))| {
            let system = if i == 0 { String::new() } else { system };
            let mut turn = DialogueTurn::new(i as u32 + 1, system, user).with_state(state);
            turn.gold_turn_label = Some(label);
            turn
        })
        .collect();
    Dialogue {
        dialogue_id: id.to_string(),
        turns,
        domains: active.iter().map(|d| d.to_string()).collect(),
    }
}

fn utterances(label: &TurnLabel, state: &BeliefState, rng: &mut ChaCha8Rng) -> (String, String) {
    let system = match state.iter().nth(rng.random_range(0..state.len().max(1))) {
        Some((slot, value)) => format!("i have noted {value} for the {slot} . anything else ?"),
        None => "how can i help you ?".to_string(),
    };
    let user = if label.is_empty() {
        "thanks , that is all for now .".to_string()
    } else {
        let parts: Vec<String> = label
            .pairs()
            .iter()
            .map(|(s, v)| format!("{v} for the {s}"))
            .collect();
        format!("i would like {}", parts.join(" and "))
    };
    (system, user)
}

/// Render dialogues in the MultiWOZ 2.1 `data.json` layout.
pub fn to_multiwoz_json(dialogues: &[Dialogue]) -> Value {
    let mut root = Map::new();
    for d in dialogues {
        let mut goal = Map::new();
        for domain in super::KNOWN_DOMAINS {
            let body = if d.domains.contains(domain) {
                json!({"info": {}})
            } else {
                json!({})
            };
            goal.insert(domain.to_string(), body);
        }
        let mut log = Vec::new();
        for (i, turn) in d.turns.iter().enumerate() {
            if i > 0 {
                // the system utterance of turn i+1 closes turn i
                if let Some(Value::Object(prev)) = log.last_mut() {
                    prev.insert("text".into(), Value::String(turn.system.text.clone()));
                }
            }
            log.push(json!({"text": turn.user.text, "metadata": {}}));
            let state = turn.gold_state.clone().unwrap_or_default();
            log.push(json!({"text": "", "metadata": metadata(&d.domains, &state)}));
        }
        if let Some(Value::Object(last)) = log.last_mut() {
            last.insert("text".into(), Value::String("goodbye .".into()));
        }
        root.insert(d.dialogue_id.clone(), json!({"goal": goal, "log": log}));
    }
    Value::Object(root)
}

fn metadata(domains: &BTreeSet<String>, state: &BeliefState) -> Value {
    let mut meta = Map::new();
    for domain in super::DEFAULT_DOMAINS {
        let mut semi = Map::new();
        let mut book = Map::new();
        book.insert("booked".into(), json!([]));
        if domains.contains(domain) {
            for (slot, value) in state.restricted_to(domain).iter() {
                let name = &slot[domain.len() + 1..];
                match name.strip_prefix("book ") {
                    Some(b) => book.insert(b.to_string(), json!(value)),
                    None => semi.insert(name.to_string(), json!(value)),
                };
            }
            semi.entry("area").or_insert(json!("not mentioned"));
        }
        meta.insert(domain.to_string(), json!({"semi": semi, "book": book}));
    }
    Value::Object(meta)
}
