use std::sync::Arc;

use crate::error::Result;
use crate::prompting::{EstimatorInput, GeneratorInput};
use crate::statecore::{TurnRef, ValueSet, VALUE_DELIMITER};

use super::{Backend, EstimatorVerdict, GoldIndex, Health, VerdictClass, UNKNOWN_SLOT};

/// Answers every request from gold labels.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    gold: Arc<GoldIndex>,
}

impl OracleBackend {
    pub fn new(gold: Arc<GoldIndex>) -> Self {
        Self { gold }
    }

    pub(crate) fn gold(&self) -> &GoldIndex {
        &self.gold
    }

    pub(crate) fn gold_slots(&self, value: &str, turn: &TurnRef) -> Result<Vec<String>> {
        let gold = self.gold.get(turn)?;
        Ok(gold.label.slots_for(value).map(str::to_string).collect())
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn generate_values(&self, _input: &GeneratorInput, turn: &TurnRef) -> Result<ValueSet> {
        Ok(self.gold.get(turn)?.values.clone())
    }

    fn estimate_values(
        &self,
        _input: &EstimatorInput,
        candidate: &ValueSet,
        turn: &TurnRef,
    ) -> Result<EstimatorVerdict> {
        let gold = &self.gold.get(turn)?.values;
        Ok(EstimatorVerdict::one_hot(VerdictClass::judge(
            candidate, gold,
        )))
    }

    fn generate_slot(&self, _forward_prompt: &str, value: &str, turn: &TurnRef) -> Result<String> {
        let slots = self.gold_slots(value, turn)?;
        if slots.is_empty() {
            Ok(UNKNOWN_SLOT.to_string())
        } else {
            Ok(slots.join(VALUE_DELIMITER))
        }
    }

    fn health_check(&self) -> Health {
        Health::Healthy { model: self.name() }
    }
}
