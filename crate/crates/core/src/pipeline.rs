//! End-to-end tracking: values, then a slot per value, then belief update.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{SharedBackend, UNKNOWN_SLOT};
use crate::corpus::Dialogue;
use crate::error::{Error, Result};
use crate::metrics::{DialogueStates, MetricsReport};
use crate::prompting::{build_generator_input, build_slot_prompts, PromptConfig, TurnContext};
use crate::statecore::{update_belief, BeliefState, TurnLabel, TurnRef, ValueSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnPrediction {
    pub turn: TurnRef,
    pub values: ValueSet,
    pub turn_label: TurnLabel,
    pub state: BeliefState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialoguePrediction {
    pub dialogue_id: String,
    pub turns: Vec<TurnPrediction>,
}

impl DialoguePrediction {
    pub fn states(&self) -> DialogueStates {
        DialogueStates {
            dialogue_id: self.dialogue_id.clone(),
            states: self.turns.iter().map(|t| t.state.clone()).collect(),
        }
    }
}

/// Split a slot answer into domain-slots. An empty answer is unknown.
pub fn parse_slot_answer(answer: &str) -> Vec<String> {
    let slots: Vec<String> = answer
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if slots.is_empty() {
        vec![UNKNOWN_SLOT.to_string()]
    } else {
        slots
    }
}

pub struct Pipeline {
    pub values: SharedBackend,
    pub slots: SharedBackend,
    pub prompt: PromptConfig,
}

impl Pipeline {
    pub fn new(values: SharedBackend, slots: SharedBackend, prompt: PromptConfig) -> Self {
        Self {
            values,
            slots,
            prompt,
        }
    }

    /// Turn label for given values, asking the slot backend once per value.
    pub fn assign_slots(
        &self,
        ctx: &TurnContext<'_>,
        values: &ValueSet,
        turn: &TurnRef,
    ) -> Result<TurnLabel> {
        let mut label = TurnLabel::new();
        for value in values.iter() {
            let prompts = build_slot_prompts(ctx, value, None, &self.prompt)?;
            let answer = self.slots.generate_slot(&prompts.forward, value, turn)?;
            for slot in parse_slot_answer(&answer) {
                label.insert(slot, value);
            }
        }
        Ok(label)
    }

    pub fn predict_dialogue(&self, dialogue: &Dialogue) -> Result<DialoguePrediction> {
        let mut state = BeliefState::new();
        let mut turns = Vec::with_capacity(dialogue.turns.len());
        for pos in 0..dialogue.turns.len() {
            let ctx = TurnContext::at(dialogue, pos);
            let turn = dialogue.turn_ref(pos);
            let input = build_generator_input(&ctx, &self.prompt);
            let values = self.values.generate_values(&input, &turn)?;
            let turn_label = self.assign_slots(&ctx, &values, &turn)?;
            state = update_belief(&state, &turn_label);
            turns.push(TurnPrediction {
                turn,
                values,
                turn_label,
                state: state.clone(),
            });
        }
        Ok(DialoguePrediction {
            dialogue_id: dialogue.dialogue_id.clone(),
            turns,
        })
    }

    /// Predict every dialogue in parallel; output order follows input order.
    pub fn predict(&self, dialogues: &[Dialogue]) -> Result<Vec<DialoguePrediction>> {
        dialogues
            .par_iter()
            .map(|d| self.predict_dialogue(d))
            .collect()
    }
}

/// Score predictions against labeled dialogues, aligned by position.
pub fn evaluate(predictions: &[DialoguePrediction], gold: &[Dialogue]) -> Result<MetricsReport> {
    let mut pred_values = Vec::new();
    let mut gold_values = Vec::new();
    let mut gold_states = Vec::with_capacity(gold.len());
    for d in gold {
        let mut states = Vec::with_capacity(d.turns.len());
        for t in &d.turns {
            let (Some(state), Some(label)) = (&t.gold_state, &t.gold_turn_label) else {
                return Err(Error::argument(format!(
                    "turn {}#{} has no gold state and label",
                    d.dialogue_id, t.turn_index
                )));
            };
            states.push(state.clone());
            gold_values.push(label.values());
        }
        gold_states.push(DialogueStates {
            dialogue_id: d.dialogue_id.clone(),
            states,
        });
    }
    for p in predictions {
        pred_values.extend(p.turns.iter().map(|t| t.values.clone()));
    }
    let pred_states: Vec<DialogueStates> =
        predictions.iter().map(DialoguePrediction::states).collect();
    MetricsReport::build(&pred_values, &gold_values, &pred_states, &gold_states)
}
