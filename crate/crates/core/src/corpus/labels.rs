use crate::error::{Error, Result};
use crate::statecore::{BeliefState, TurnLabel};

use super::Dialogue;

/// Fill `gold_turn_label` from consecutive cumulative states.
///
/// The label of turn t holds every pair of B_t that is new or changed with
/// respect to B_{t-1}, with B_0 empty. Ingestion never produces deletions.
pub fn derive_turn_labels(dialogue: &Dialogue) -> Result<Dialogue> {
    let mut out = dialogue.clone();
    let mut prior = BeliefState::new();
    for turn in &mut out.turns {
        let state = turn.gold_state.as_ref().ok_or_else(|| {
            Error::argument(format!(
                "turn {} of {} has no gold state",
                turn.turn_index, dialogue.dialogue_id
            ))
        })?;
        let label: TurnLabel = state
            .iter()
            .filter(|(slot, value)| prior.get(slot) != Some(*value))
            .collect();
        prior = state.clone();
        turn.gold_turn_label = Some(label);
    }
    Ok(out)
}

pub fn derive_all_turn_labels(dialogues: &[Dialogue]) -> Result<Vec<Dialogue>> {
    use rayon::prelude::*;
    dialogues.par_iter().map(derive_turn_labels).collect()
}
