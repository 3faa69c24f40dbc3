//! The canonical turn record: one JSON object per line and per turn,
//! `{dialogue_id, turn_index, system, user, state?, turn_label?}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::statecore::{BeliefState, TurnLabel};

use super::{Dialogue, DialogueTurn, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    pub dialogue_id: String,
    pub turn_index: u32,
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<BeliefState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_label: Option<TurnLabel>,
}

pub fn to_records(dialogues: &[Dialogue]) -> Vec<TurnRecord> {
    dialogues
        .iter()
        .flat_map(|d| {
            d.turns.iter().map(move |t| TurnRecord {
                dialogue_id: d.dialogue_id.clone(),
                turn_index: t.turn_index,
                system: t.system.text.clone(),
                user: t.user.text.clone(),
                state: t.gold_state.clone(),
                turn_label: t.gold_turn_label.clone(),
            })
        })
        .collect()
}

/// Group records back into dialogues, in order of first appearance.
///
/// Records of one dialogue must be contiguous with strictly increasing turn
/// indices, and a turn label requires a state.
pub fn from_records(records: Vec<TurnRecord>, origin: &Path) -> Result<Vec<Dialogue>> {
    let mut dialogues: Vec<Dialogue> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for rec in records {
        if rec.turn_label.is_some() && rec.state.is_none() {
            return Err(Error::data(
                origin,
                format!(
                    "{}#{}: turn_label without state",
                    rec.dialogue_id, rec.turn_index
                ),
            ));
        }
        let continues = dialogues
            .last()
            .is_some_and(|d| d.dialogue_id == rec.dialogue_id);
        if !continues {
            if !seen.insert(rec.dialogue_id.clone()) {
                return Err(Error::data(
                    origin,
                    format!("records of {} are not contiguous", rec.dialogue_id),
                ));
            }
            dialogues.push(Dialogue {
                dialogue_id: rec.dialogue_id.clone(),
                turns: Vec::new(),
                domains: BTreeSet::new(),
            });
        }
        let dialogue = dialogues.last_mut().expect("pushed above");
        if let Some(prev) = dialogue.turns.last() {
            if rec.turn_index <= prev.turn_index {
                return Err(Error::data(
                    origin,
                    format!(
                        "{}: turn_index {} not increasing",
                        rec.dialogue_id, rec.turn_index
                    ),
                ));
            }
        }
        if let Some(state) = &rec.state {
            dialogue.domains.extend(state.domains());
        }
        dialogue.turns.push(DialogueTurn {
            turn_index: rec.turn_index,
            system: Utterance::system(&rec.system),
            user: Utterance::user(&rec.user),
            gold_state: rec.state,
            gold_turn_label: rec.turn_label,
        });
    }
    Ok(dialogues)
}

pub fn write_dialogues(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    jsonl::write(path, &to_records(dialogues))
}

pub fn read_dialogues(path: &Path) -> Result<Vec<Dialogue>> {
    from_records(jsonl::read(path)?, path)
}
