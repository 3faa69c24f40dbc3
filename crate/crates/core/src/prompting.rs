//! Prompt construction for the value generator, the value estimator and the
//! slot generator.
//!
//! A turn renders as `S ; U`, history turns are joined with ` ; `, and
//! segments are joined with single spaces (an empty history contributes no
//! segment). The estimator and slot prompts separate history from the current
//! turn with ` . `. Special tokens are plain marker strings here.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, DialogueTurn};
use crate::error::{Error, Result};
use crate::statecore::ValueSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Templates {
    /// Estimator prompt for an empty value set.
    pub no_values: String,
    /// Estimator prompt; `{values}` is replaced by the comma-joined values.
    pub values: String,
    /// Slot prompt; `{value}` is replaced by the state value.
    pub slot_of_value: String,
    /// Inverse slot prompt; `{slot}` is replaced by the domain-slot.
    pub value_of_slot: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            no_values: "there are no values mentioned in this turn.".into(),
            values: "all the values mentioned in this turn are {values}.".into(),
            slot_of_value: "what is the slot type of {value}".into(),
            value_of_slot: "what is the value of {slot}".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub prefix: String,
    pub history_marker: String,
    pub turn_marker: String,
    pub cls_marker: String,
    pub sep_marker: String,
    /// Character budget for an assembled prompt; history is dropped from the
    /// oldest turn until the prompt fits.
    pub max_history_chars: usize,
    pub templates: Templates,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            prefix: "get the requests that the user confirmed or mentioned in this turn".into(),
            history_marker: "[HISTORY]".into(),
            turn_marker: "[TURN]".into(),
            cls_marker: "[CLS]".into(),
            sep_marker: "[SEP]".into(),
            max_history_chars: 3000,
            templates: Templates::default(),
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        let markers = [
            ("history_marker", &self.history_marker),
            ("turn_marker", &self.turn_marker),
            ("cls_marker", &self.cls_marker),
            ("sep_marker", &self.sep_marker),
        ];
        for (i, (name, m)) in markers.iter().enumerate() {
            if m.trim().is_empty() {
                return Err(Error::argument(format!("prompt {name} is empty")));
            }
            if markers[..i].iter().any(|(_, other)| other == m) {
                return Err(Error::argument(format!(
                    "prompt {name} duplicates another marker"
                )));
            }
        }
        if self.max_history_chars == 0 {
            return Err(Error::argument("prompt max_history_chars must be positive"));
        }
        let t = &self.templates;
        for (name, tpl, placeholder) in [
            ("values", &t.values, "{values}"),
            ("slot_of_value", &t.slot_of_value, "{value}"),
            ("value_of_slot", &t.value_of_slot, "{slot}"),
        ] {
            if !tpl.contains(placeholder) {
                return Err(Error::argument(format!(
                    "template {name} lacks placeholder {placeholder}"
                )));
            }
        }
        Ok(())
    }
}

/// A turn together with the turns before it.
#[derive(Debug, Clone, Copy)]
pub struct TurnContext<'a> {
    pub history: &'a [DialogueTurn],
    pub current: &'a DialogueTurn,
}

impl<'a> TurnContext<'a> {
    pub fn new(history: &'a [DialogueTurn], current: &'a DialogueTurn) -> Self {
        Self { history, current }
    }

    /// Context of the turn at `position` in `dialogue`.
    pub fn at(dialogue: &'a Dialogue, position: usize) -> Self {
        Self {
            history: &dialogue.turns[..position],
            current: &dialogue.turns[position],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorInput {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorInput {
    pub text: String,
    pub value_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPromptPair {
    pub forward: String,
    /// Present only when built with a domain-slot (training).
    pub inverse: Option<String>,
}

impl SlotPromptPair {
    pub fn require_inverse(&self) -> Result<&str> {
        self.inverse
            .as_deref()
            .ok_or_else(|| Error::argument("inverse prompt requested without a domain-slot"))
    }
}

fn render_turn(turn: &DialogueTurn) -> String {
    format!("{} ; {}", turn.system.text, turn.user.text)
}

fn render_history(turns: &[DialogueTurn]) -> String {
    turns
        .iter()
        .map(render_turn)
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn join_segments(segments: &[&str]) -> String {
    segments
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Assemble with the longest history suffix that keeps the text within
/// budget. The current turn is never truncated.
fn fit_history(
    ctx: &TurnContext<'_>,
    cfg: &PromptConfig,
    assemble: impl Fn(&str) -> String,
) -> String {
    let mut start = 0;
    loop {
        let text = assemble(&render_history(&ctx.history[start..]));
        if text.chars().count() <= cfg.max_history_chars || start == ctx.history.len() {
            return text;
        }
        start += 1;
    }
}

pub fn build_generator_input(ctx: &TurnContext<'_>, cfg: &PromptConfig) -> GeneratorInput {
    let current = render_turn(ctx.current);
    let text = fit_history(ctx, cfg, |history| {
        join_segments(&[
            &cfg.prefix,
            &cfg.history_marker,
            history,
            &cfg.turn_marker,
            &current,
        ])
    });
    GeneratorInput { text }
}

/// The value prompt sentence for a candidate value set.
pub fn value_prompt(vs: &ValueSet, cfg: &PromptConfig) -> String {
    if vs.is_empty() {
        cfg.templates.no_values.clone()
    } else {
        cfg.templates
            .values
            .replace("{values}", &vs.as_slice().join(", "))
    }
}

pub fn build_estimator_input(
    ctx: &TurnContext<'_>,
    vs: &ValueSet,
    cfg: &PromptConfig,
) -> EstimatorInput {
    let current = render_turn(ctx.current);
    let prompt = value_prompt(vs, cfg);
    let text = fit_history(ctx, cfg, |history| {
        join_segments(&[
            &cfg.cls_marker,
            history,
            ".",
            &current,
            &cfg.sep_marker,
            &prompt,
        ])
    });
    EstimatorInput {
        text,
        value_count: vs.len(),
    }
}

pub fn build_slot_prompts(
    ctx: &TurnContext<'_>,
    value: &str,
    domain_slot: Option<&str>,
    cfg: &PromptConfig,
) -> Result<SlotPromptPair> {
    if value.trim().is_empty() {
        return Err(Error::argument("slot prompt needs a non-empty value"));
    }
    let current = render_turn(ctx.current);
    let with_question = |question: &str| {
        fit_history(ctx, cfg, |history| {
            join_segments(&[
                history,
                ".",
                &current,
                &cfg.sep_marker,
                question,
                &cfg.sep_marker,
            ])
        })
    };
    let forward = with_question(&cfg.templates.slot_of_value.replace("{value}", value));
    let inverse =
        domain_slot.map(|slot| with_question(&cfg.templates.value_of_slot.replace("{slot}", slot)));
    Ok(SlotPromptPair { forward, inverse })
}
