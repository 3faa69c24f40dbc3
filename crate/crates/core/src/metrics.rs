//! Turn-level accuracy, joint goal accuracy and per-class estimator F1.
//!
//! Values are compared after the substitution table is applied on both
//! sides, and value sets are compared as sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backends::VerdictClass;
use crate::error::{Error, Result};
use crate::normalize::{normalize_text, SubstitutionTable};
use crate::statecore::{BeliefState, ValueSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "TLA")]
    Tla,
    #[serde(rename = "JGA")]
    Jga,
    #[serde(rename = "F1_correct")]
    F1Correct,
    #[serde(rename = "F1_incomplete")]
    F1Incomplete,
    #[serde(rename = "F1_incorrect")]
    F1Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueScore {
    pub dialogue_id: String,
    pub correct: usize,
    pub turns: usize,
}

impl DialogueScore {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.turns as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: Metric,
    pub value: f64,
    /// Denominator.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_dialogue: Option<Vec<DialogueScore>>,
}

fn canonical_value(v: &str) -> String {
    SubstitutionTable::builtin()
        .canonical(&normalize_text(v))
        .to_string()
}

fn canonical_set(vs: &ValueSet) -> BTreeSet<String> {
    vs.iter().map(canonical_value).collect()
}

fn canonical_state(state: &BeliefState) -> BTreeMap<String, String> {
    state
        .iter()
        .map(|(k, v)| (k.to_string(), canonical_value(v)))
        .collect()
}

pub fn values_match(predicted: &ValueSet, gold: &ValueSet) -> bool {
    canonical_set(predicted) == canonical_set(gold)
}

pub fn states_match(predicted: &BeliefState, gold: &BeliefState) -> bool {
    canonical_state(predicted) == canonical_state(gold)
}

/// Fraction of turns whose predicted value set equals gold.
pub fn tla(predicted: &[ValueSet], gold: &[ValueSet]) -> Result<EvalResult> {
    if predicted.len() != gold.len() {
        return Err(Error::argument(format!(
            "tla: {} predictions for {} gold turns",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::argument("tla: no turns"));
    }
    let correct = predicted
        .iter()
        .zip(gold)
        .filter(|(p, g)| values_match(p, g))
        .count();
    Ok(EvalResult {
        metric: Metric::Tla,
        value: correct as f64 / gold.len() as f64,
        n: gold.len(),
        per_dialogue: None,
    })
}

/// Per-turn belief states of one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueStates {
    pub dialogue_id: String,
    pub states: Vec<BeliefState>,
}

fn check_alignment(predicted: &[DialogueStates], gold: &[DialogueStates]) -> Result<()> {
    if predicted.len() != gold.len() {
        return Err(Error::argument(format!(
            "jga: {} predicted dialogues for {} gold",
            predicted.len(),
            gold.len()
        )));
    }
    for (p, g) in predicted.iter().zip(gold) {
        if p.dialogue_id != g.dialogue_id || p.states.len() != g.states.len() {
            return Err(Error::argument(format!(
                "jga: dialogue {} ({} turns) misaligned with gold {} ({} turns)",
                p.dialogue_id,
                p.states.len(),
                g.dialogue_id,
                g.states.len()
            )));
        }
    }
    Ok(())
}

/// Fraction of all turns (turn 1 included) whose full predicted state equals
/// gold, with a per-dialogue breakdown.
pub fn jga(predicted: &[DialogueStates], gold: &[DialogueStates]) -> Result<EvalResult> {
    check_alignment(predicted, gold)?;
    let per_dialogue: Vec<DialogueScore> = predicted
        .iter()
        .zip(gold)
        .map(|(p, g)| DialogueScore {
            dialogue_id: g.dialogue_id.clone(),
            correct: p
                .states
                .iter()
                .zip(&g.states)
                .filter(|(ps, gs)| states_match(ps, gs))
                .count(),
            turns: g.states.len(),
        })
        .collect();
    let n: usize = per_dialogue.iter().map(|d| d.turns).sum();
    if n == 0 {
        return Err(Error::argument("jga: no turns"));
    }
    let correct: usize = per_dialogue.iter().map(|d| d.correct).sum();
    Ok(EvalResult {
        metric: Metric::Jga,
        value: correct as f64 / n as f64,
        n,
        per_dialogue: Some(per_dialogue),
    })
}

/// JGA restricted to one domain's slots, over dialogues whose gold states
/// involve that domain.
pub fn jga_by_domain(
    predicted: &[DialogueStates],
    gold: &[DialogueStates],
) -> Result<BTreeMap<String, f64>> {
    check_alignment(predicted, gold)?;
    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (p, g) in predicted.iter().zip(gold) {
        let domains: BTreeSet<String> = g.states.iter().flat_map(BeliefState::domains).collect();
        for domain in domains {
            let entry = tallies.entry(domain.clone()).or_default();
            for (ps, gs) in p.states.iter().zip(&g.states) {
                entry.1 += 1;
                if states_match(&ps.restricted_to(&domain), &gs.restricted_to(&domain)) {
                    entry.0 += 1;
                }
            }
        }
    }
    Ok(tallies
        .into_iter()
        .map(|(d, (c, n))| (d, c as f64 / n as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: VerdictClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub classes: Vec<ClassScore>,
    pub n: usize,
}

impl F1Report {
    pub fn class(&self, class: VerdictClass) -> &ClassScore {
        &self.classes[class.index() as usize]
    }

    /// The checkpoint-selection scalar.
    pub fn selection_score(&self) -> f64 {
        self.class(VerdictClass::Correct).f1
    }

    pub fn results(&self) -> Vec<EvalResult> {
        [Metric::F1Correct, Metric::F1Incomplete, Metric::F1Incorrect]
            .into_iter()
            .zip(&self.classes)
            .map(|(metric, c)| EvalResult {
                metric,
                value: c.f1,
                n: self.n,
                per_dialogue: None,
            })
            .collect()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 of estimator argmax predictions.
pub fn estimator_f1(predictions: &[VerdictClass], gold: &[VerdictClass]) -> Result<F1Report> {
    if predictions.is_empty() {
        return Err(Error::argument("estimator_f1: empty input"));
    }
    if predictions.len() != gold.len() {
        return Err(Error::argument(format!(
            "estimator_f1: {} predictions for {} labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut tp = [0usize; 3];
    let mut predicted = [0usize; 3];
    let mut actual = [0usize; 3];
    for (p, g) in predictions.iter().zip(gold) {
        predicted[p.index() as usize] += 1;
        actual[g.index() as usize] += 1;
        if p == g {
            tp[p.index() as usize] += 1;
        }
    }
    let classes = VerdictClass::ALL
        .into_iter()
        .map(|class| {
            let i = class.index() as usize;
            let precision = ratio(tp[i], predicted[i]);
            let recall = ratio(tp[i], actual[i]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScore {
                class,
                precision,
                recall,
                f1,
                support: actual[i],
            }
        })
        .collect();
    Ok(F1Report {
        classes,
        n: predictions.len(),
    })
}

/// Written by the `evaluate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tla: EvalResult,
    pub jga: EvalResult,
    pub jga_by_domain: BTreeMap<String, f64>,
    /// Lowest per-dialogue JGA first, at most 20.
    pub worst_dialogues: Vec<DialogueScore>,
}

pub const WORST_DIALOGUES: usize = 20;

impl MetricsReport {
    pub fn build(
        predicted_values: &[ValueSet],
        gold_values: &[ValueSet],
        predicted_states: &[DialogueStates],
        gold_states: &[DialogueStates],
    ) -> Result<Self> {
        let tla = tla(predicted_values, gold_values)?;
        let mut jga = jga(predicted_states, gold_states)?;
        let jga_by_domain = jga_by_domain(predicted_states, gold_states)?;
        let mut worst = jga.per_dialogue.clone().unwrap_or_default();
        worst.sort_by(|a, b| {
            a.accuracy()
                .total_cmp(&b.accuracy())
                .then_with(|| a.dialogue_id.cmp(&b.dialogue_id))
        });
        worst.truncate(WORST_DIALOGUES);
        // the full breakdown is large; the report keeps only the worst list
        jga.per_dialogue = None;
        Ok(Self {
            tla,
            jga,
            jga_by_domain,
            worst_dialogues: worst,
        })
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>8} {:>8}", "metric", "value", "n");
        let _ = writeln!(
            out,
            "{:<24} {:>8.4} {:>8}",
            "TLA", self.tla.value, self.tla.n
        );
        let _ = writeln!(
            out,
            "{:<24} {:>8.4} {:>8}",
            "JGA", self.jga.value, self.jga.n
        );
        for (domain, v) in &self.jga_by_domain {
            let _ = writeln!(out, "{:<24} {:>8.4}", format!("JGA[{domain}]"), v);
        }
        if !self.worst_dialogues.is_empty() {
            let _ = writeln!(out, "worst dialogues:");
            for d in &self.worst_dialogues {
                let _ = writeln!(out, "  {:<22} {}/{}", d.dialogue_id, d.correct, d.turns);
            }
        }
        out
    }
}
