//! Dialogue state tracking by state-value generation.
//!
//! The pipeline generates the values mentioned at each turn, assigns each
//! value a domain-slot, and folds the resulting turn labels into a belief
//! state. The value generator can be improved by self-training, where an
//! estimator keeps only pseudo-labels it judges complete and correct.
//! Models sit behind [`backends::Backend`]; oracle and noisy backends make
//! every stage testable without them.

pub mod backends;
pub mod corpus;
pub mod error;
pub mod jsonl;
pub mod metrics;
pub mod negsample;
pub mod normalize;
pub mod pipeline;
pub mod prompting;
pub mod selftrain;
pub mod statecore;

pub use error::{Error, Result};
