//! Teacher-student self-training over the unlabeled pool.
//!
//! Each iteration pseudo-labels the remaining pool with the current teacher,
//! keeps the turns the estimator scores as correct with probability at least
//! the threshold, moves them permanently into the training set, trains a
//! student on the merged file and makes it the next teacher. The loop stops
//! when validation TLA stops improving or the iteration budget is spent.

pub mod snapshot;
pub mod trainer;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::backends::{Backend, BackendDescriptor, EstimatorVerdict, GoldIndex, Health};
use crate::corpus::Dialogue;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::metrics;
use crate::negsample::{self, SamplerConfig};
use crate::prompting::{
    build_estimator_input, build_generator_input, build_slot_prompts, PromptConfig, TurnContext,
};
use crate::statecore::{encode_values, TurnRef, ValueSet};

use snapshot::SnapshotStore;
use trainer::{TrainJob, TrainTask, Trainer, TrainerHook};

/// A batch is aborted when more than one turn in this many fails.
pub const MAX_FAILURE_DIVISOR: usize = 10;

pub const SELECTION_LEDGER: &str = "selection.jsonl";
pub const VALUES_TRAIN_FILE: &str = "values-train.jsonl";
pub const ESTIMATOR_TRAIN_FILE: &str = "estimator-train.jsonl";
pub const ESTIMATOR_VALID_FILE: &str = "estimator-valid.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoExample {
    pub turn: TurnRef,
    pub teacher_values: ValueSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<EstimatorVerdict>,
    pub selected: bool,
    pub iteration: u32,
}

impl PseudoExample {
    pub fn p_correct(&self) -> f64 {
        self.verdict.map_or(0.0, |v| v.p_correct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    /// Keep turns whose verdict reaches the threshold.
    Estimator,
    /// Keep a uniformly random sample as large as the estimator would keep.
    Vanilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorPolicy {
    /// Train the estimator on the synthesized seed dataset before the first
    /// iteration and keep it for all later ones.
    TrainOnce,
    /// Use the configured estimator as is.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StopMetric {
    Tla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    pub threshold: f64,
    pub max_iterations: u32,
    pub blank_rate_guard: f64,
    pub stop_metric: StopMetric,
    pub selection: SelectionStrategy,
    pub estimator_policy: EstimatorPolicy,
    pub seed: u64,
    pub teacher: BackendDescriptor,
    pub estimator: BackendDescriptor,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trainer: Option<TrainerHook>,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            threshold: 0.98,
            max_iterations: 2,
            blank_rate_guard: 1.5,
            stop_metric: StopMetric::Tla,
            selection: SelectionStrategy::Estimator,
            estimator_policy: EstimatorPolicy::TrainOnce,
            seed: 0,
            teacher: BackendDescriptor::oracle(),
            estimator: BackendDescriptor::oracle(),
            trainer: None,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::argument(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::argument("max_iterations must be at least 1"));
        }
        if self.blank_rate_guard.is_nan() || self.blank_rate_guard <= 0.0 {
            return Err(Error::argument("blank_rate_guard must be positive"));
        }
        self.teacher.validate()?;
        self.estimator.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoImprovement,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub n_pseudo_labeled: usize,
    pub n_failed: usize,
    pub n_selected: usize,
    pub blank_rate_selected: f64,
    pub blank_rate_warning: bool,
    pub validation_tla: f64,
    /// Training-set turns after the transfer.
    pub labeled_size: usize,
    /// Unlabeled turns left after the transfer.
    pub pool_size: usize,
    pub stopped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
}

/// Dialogue lookup for building per-turn model inputs.
pub struct Contexts<'a> {
    by_id: HashMap<&'a str, &'a Dialogue>,
}

impl<'a> Contexts<'a> {
    pub fn new<I: IntoIterator<Item = &'a Dialogue>>(dialogues: I) -> Self {
        Self {
            by_id: dialogues
                .into_iter()
                .map(|d| (d.dialogue_id.as_str(), d))
                .collect(),
        }
    }

    pub fn get(&self, turn: &TurnRef) -> Result<TurnContext<'a>> {
        let d: &'a Dialogue = self
            .by_id
            .get(turn.dialogue_id.as_str())
            .ok_or_else(|| Error::argument(format!("no dialogue for turn {turn}")))?;
        let pos = d
            .position_of(turn.turn_index)
            .ok_or_else(|| Error::argument(format!("no such turn {turn}")))?;
        Ok(TurnContext::at(d, pos))
    }
}

/// Every turn of `dialogues` in order.
pub fn turn_refs(dialogues: &[Dialogue]) -> Vec<TurnRef> {
    dialogues
        .iter()
        .flat_map(|d| (0..d.turns.len()).map(move |p| d.turn_ref(p)))
        .collect()
}

/// Apply `f` to every item in parallel, isolating per-item failures.
fn fan_out<T, R, F>(stage: &'static str, items: &[T], f: F) -> Result<(Vec<R>, usize)>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let results: Vec<Result<R>> = items.par_iter().map(f).collect();
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                warn!(stage, error = %e, "turn skipped");
                failed += 1;
            }
        }
    }
    if failed * MAX_FAILURE_DIVISOR > total {
        return Err(Error::Batch {
            stage,
            failed,
            total,
        });
    }
    Ok((ok, failed))
}

fn require_healthy(backend: &dyn Backend, role: &str) -> Result<()> {
    match backend.health_check() {
        Health::Healthy { .. } => Ok(()),
        Health::Degraded { cause } => Err(Error::Backend {
            turn: TurnRef::new("health", 0),
            message: format!("{role} {} is degraded: {cause}", backend.name()),
        }),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoBatch {
    pub examples: Vec<PseudoExample>,
    pub n_failed: usize,
}

/// Run the teacher over `turns`. Verdicts are left unset.
pub fn pseudo_label(
    teacher: &dyn Backend,
    turns: &[TurnRef],
    contexts: &Contexts<'_>,
    prompt: &PromptConfig,
    iteration: u32,
) -> Result<PseudoBatch> {
    if turns.is_empty() {
        return Ok(PseudoBatch::default());
    }
    require_healthy(teacher, "teacher")?;
    let (examples, n_failed) = fan_out("pseudo-label", turns, |turn| {
        let ctx = contexts.get(turn)?;
        let values = teacher.generate_values(&build_generator_input(&ctx, prompt), turn)?;
        Ok(PseudoExample {
            turn: turn.clone(),
            teacher_values: values,
            verdict: None,
            selected: false,
            iteration,
        })
    })?;
    Ok(PseudoBatch { examples, n_failed })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub selected: Vec<PseudoExample>,
    pub rejected: Vec<PseudoExample>,
    pub n_failed: usize,
    pub blank_rate_selected: f64,
    pub blank_rate_warning: bool,
}

impl Selection {
    fn finish(mut self, seed_blank_rate: f64, guard: f64) -> Self {
        self.blank_rate_selected = blank_rate(self.selected.iter().map(|e| &e.teacher_values));
        self.blank_rate_warning =
            !self.selected.is_empty() && self.blank_rate_selected > guard * seed_blank_rate;
        if self.blank_rate_warning {
            warn!(
                blank_rate = self.blank_rate_selected,
                seed_blank_rate, "selected pseudo-labels are unusually often blank"
            );
        }
        self
    }

    /// Ledger order: every scored example, sorted by turn.
    pub fn ledger(&self) -> Vec<&PseudoExample> {
        let mut all: Vec<_> = self.selected.iter().chain(&self.rejected).collect();
        all.sort_by(|a, b| a.turn.cmp(&b.turn));
        all
    }
}

/// Fraction of empty value sets; 0 for no sets.
pub fn blank_rate<'a, I: IntoIterator<Item = &'a ValueSet>>(sets: I) -> f64 {
    let (mut blank, mut n) = (0usize, 0usize);
    for s in sets {
        n += 1;
        blank += usize::from(s.is_empty());
    }
    if n == 0 {
        0.0
    } else {
        blank as f64 / n as f64
    }
}

/// Blank rate of the gold labels of labeled turns.
pub fn seed_blank_rate(labeled: &[Dialogue]) -> f64 {
    let sets: Vec<ValueSet> = labeled
        .iter()
        .flat_map(|d| d.turns.iter().filter_map(|t| t.gold_values()))
        .collect();
    blank_rate(&sets)
}

/// Attach an estimator verdict to every example. Returns the scored
/// examples and the number of turns that failed.
pub fn score(
    examples: &[PseudoExample],
    estimator: &dyn Backend,
    contexts: &Contexts<'_>,
    prompt: &PromptConfig,
) -> Result<(Vec<PseudoExample>, usize)> {
    if examples.is_empty() {
        return Ok((Vec::new(), 0));
    }
    require_healthy(estimator, "estimator")?;
    fan_out("score", examples, |e| {
        let ctx = contexts.get(&e.turn)?;
        let input = build_estimator_input(&ctx, &e.teacher_values, prompt);
        let verdict = estimator.estimate_values(&input, &e.teacher_values, &e.turn)?;
        let mut out = e.clone();
        out.verdict = Some(verdict);
        Ok(out)
    })
}

/// Score every example and keep those with `p_correct >= threshold`.
pub fn score_and_filter(
    examples: Vec<PseudoExample>,
    estimator: &dyn Backend,
    contexts: &Contexts<'_>,
    prompt: &PromptConfig,
    cfg: &SelfTrainConfig,
    seed_blank_rate: f64,
) -> Result<Selection> {
    let (scored, n_failed) = score(&examples, estimator, contexts, prompt)?;
    let mut selection = apply_threshold(scored, cfg, seed_blank_rate)?;
    selection.n_failed = n_failed;
    Ok(selection)
}

/// Split already scored examples by `p_correct >= threshold`.
pub fn apply_threshold(
    examples: Vec<PseudoExample>,
    cfg: &SelfTrainConfig,
    seed_blank_rate: f64,
) -> Result<Selection> {
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for mut e in examples {
        let verdict = e.verdict.ok_or_else(|| {
            Error::argument(format!("pseudo-label for {} has no verdict", e.turn))
        })?;
        e.selected = verdict.p_correct >= cfg.threshold;
        if e.selected {
            selected.push(e);
        } else {
            rejected.push(e);
        }
    }
    Ok(Selection {
        selected,
        rejected,
        ..Default::default()
    }
    .finish(seed_blank_rate, cfg.blank_rate_guard))
}

/// Reselect `count` examples uniformly at random from a scored selection.
pub fn select_vanilla(
    scored: Selection,
    count: usize,
    seed: u64,
    cfg: &SelfTrainConfig,
    seed_blank_rate: f64,
) -> Selection {
    let mut all: Vec<PseudoExample> = scored.selected.into_iter().chain(scored.rejected).collect();
    all.sort_by(|a, b| a.turn.cmp(&b.turn));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: HashSet<usize> = index::sample(&mut rng, all.len(), count.min(all.len()))
        .into_iter()
        .collect();
    let (selected, rejected) = all
        .into_iter()
        .enumerate()
        .map(|(i, mut e)| {
            e.selected = keep.contains(&i);
            e
        })
        .partition(|e| e.selected);
    Selection {
        selected,
        rejected,
        n_failed: scored.n_failed,
        ..Default::default()
    }
    .finish(seed_blank_rate, cfg.blank_rate_guard)
}

/// One line of a value generator training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub input: String,
    pub target: String,
}

/// Training records for gold turns of `labeled` followed by `transferred`.
pub fn generator_records(
    labeled: &[Dialogue],
    transferred: &[PseudoExample],
    contexts: &Contexts<'_>,
    prompt: &PromptConfig,
) -> Result<Vec<GeneratorRecord>> {
    let mut out = Vec::new();
    for d in labeled {
        for pos in 0..d.turns.len() {
            let Some(label) = &d.turns[pos].gold_turn_label else {
                continue;
            };
            out.push(GeneratorRecord {
                input: build_generator_input(&TurnContext::at(d, pos), prompt).text,
                target: encode_values(&label.values())?,
            });
        }
    }
    for e in transferred {
        out.push(GeneratorRecord {
            input: build_generator_input(&contexts.get(&e.turn)?, prompt).text,
            target: encode_values(&e.teacher_values)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotDirection {
    /// Value to domain-slot.
    Forward,
    /// Domain-slot back to value; weighted by the trainer.
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotRecord {
    pub direction: SlotDirection,
    pub input: String,
    pub target: String,
}

/// Slot-generator training records for the gold turns of `labeled`.
///
/// Each distinct value of a turn yields one forward record whose target lists
/// every slot it fills, and each (slot, value) pair one inverse record.
pub fn slot_records(labeled: &[Dialogue], prompt: &PromptConfig) -> Result<Vec<SlotRecord>> {
    let mut out = Vec::new();
    for d in labeled {
        for pos in 0..d.turns.len() {
            let Some(label) = &d.turns[pos].gold_turn_label else {
                continue;
            };
            let ctx = TurnContext::at(d, pos);
            for value in label.values().iter() {
                let slots: Vec<&str> = label.slots_for(value).collect();
                out.push(SlotRecord {
                    direction: SlotDirection::Forward,
                    input: build_slot_prompts(&ctx, value, None, prompt)?.forward,
                    target: slots.join(crate::statecore::VALUE_DELIMITER),
                });
                for slot in slots {
                    let pair = build_slot_prompts(&ctx, value, Some(slot), prompt)?;
                    out.push(SlotRecord {
                        direction: SlotDirection::Inverse,
                        input: pair.require_inverse()?.to_string(),
                        target: value.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// TLA of `backend`'s value sets on labeled dialogues.
pub fn validation_tla(
    backend: &dyn Backend,
    valid: &[Dialogue],
    prompt: &PromptConfig,
) -> Result<f64> {
    let per_dialogue: Vec<(Vec<ValueSet>, Vec<ValueSet>)> = valid
        .par_iter()
        .map(|d| {
            let mut pred = Vec::with_capacity(d.turns.len());
            let mut gold = Vec::with_capacity(d.turns.len());
            for pos in 0..d.turns.len() {
                let label = d.turns[pos].gold_turn_label.as_ref().ok_or_else(|| {
                    Error::argument(format!("validation turn {} is unlabeled", d.turn_ref(pos)))
                })?;
                let input = build_generator_input(&TurnContext::at(d, pos), prompt);
                pred.push(backend.generate_values(&input, &d.turn_ref(pos))?);
                gold.push(label.values());
            }
            Ok((pred, gold))
        })
        .collect::<Result<_>>()?;
    let (pred, gold): (Vec<_>, Vec<_>) = per_dialogue.into_iter().unzip();
    let pred: Vec<ValueSet> = pred.into_iter().flatten().collect();
    let gold: Vec<ValueSet> = gold.into_iter().flatten().collect();
    Ok(metrics::tla(&pred, &gold)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub iteration: u32,
    pub validation_tla: f64,
    pub teacher: BackendDescriptor,
}

/// Persisted loop state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    /// Completed iterations.
    pub iteration: u32,
    pub config: SelfTrainConfig,
    pub teacher: BackendDescriptor,
    pub estimator: BackendDescriptor,
    pub estimator_trained: bool,
    pub baseline_tla: f64,
    pub seed_turns: usize,
    pub transferred: Vec<PseudoExample>,
    pub pool: Vec<TurnRef>,
    pub reports: Vec<IterationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<BestModel>,
}

impl LoopState {
    pub fn stopped(&self) -> bool {
        self.reports.last().is_some_and(|r| r.stopped)
    }

    pub fn labeled_size(&self) -> usize {
        self.seed_turns + self.transferred.len()
    }
}

/// Everything an iteration reads besides its state.
pub struct SelfTrainInputs<'a> {
    pub labeled: &'a [Dialogue],
    /// Stripped dialogues of the unlabeled pool.
    pub unlabeled: &'a [Dialogue],
    pub valid: &'a [Dialogue],
    /// Gold answers used by local backends; may be empty for remote ones.
    pub gold: Arc<GoldIndex>,
    pub prompt: &'a PromptConfig,
    pub sampler: &'a SamplerConfig,
    pub trainer: &'a dyn Trainer,
    pub work_dir: &'a Path,
}

impl SelfTrainInputs<'_> {
    fn store(&self) -> SnapshotStore {
        SnapshotStore::new(self.work_dir)
    }
}

pub fn initial_state(inputs: &SelfTrainInputs<'_>, cfg: &SelfTrainConfig) -> Result<LoopState> {
    cfg.validate()?;
    let teacher = cfg.teacher.build(&inputs.gold)?;
    let baseline_tla = validation_tla(teacher.as_ref(), inputs.valid, inputs.prompt)?;
    Ok(LoopState {
        iteration: 0,
        config: cfg.clone(),
        teacher: cfg.teacher.clone(),
        estimator: cfg.estimator.clone(),
        estimator_trained: cfg.estimator_policy == EstimatorPolicy::Frozen,
        baseline_tla,
        seed_turns: inputs.labeled.iter().map(|d| d.turns.len()).sum(),
        transferred: Vec::new(),
        pool: turn_refs(inputs.unlabeled),
        reports: Vec::new(),
        best: None,
    })
}

fn train_estimator(
    inputs: &SelfTrainInputs<'_>,
    staging: &snapshot::Staging,
    iteration: u32,
) -> Result<BackendDescriptor> {
    let dataset = negsample::synth_dataset(inputs.labeled, inputs.sampler);
    let train = negsample::to_records(inputs.labeled, &dataset.train, inputs.prompt)?;
    let valid = negsample::to_records(inputs.labeled, &dataset.valid, inputs.prompt)?;
    let train_file = staging.file(ESTIMATOR_TRAIN_FILE);
    jsonl::write(&train_file, &train)?;
    jsonl::write(&staging.file(ESTIMATOR_VALID_FILE), &valid)?;
    let model = inputs.trainer.train(&TrainJob {
        task: TrainTask::Estimator,
        train_file,
        out_dir: staging.file("estimator-model"),
        iteration,
    })?;
    Ok(model.backend)
}

/// Run one iteration and commit its snapshot. On any failure the committed
/// snapshot and state file are left as they were.
pub fn run_iteration(
    inputs: &SelfTrainInputs<'_>,
    state: &LoopState,
) -> Result<(LoopState, IterationReport)> {
    let cfg = &state.config;
    let i = state.iteration + 1;
    let store = inputs.store();
    let staging = store.begin(i)?;
    let contexts = Contexts::new(inputs.unlabeled);

    let mut estimator_desc = state.estimator.clone();
    let mut estimator_trained = state.estimator_trained;
    if !estimator_trained {
        estimator_desc = train_estimator(inputs, &staging, i)?;
        estimator_trained = true;
    }

    let teacher = state.teacher.build(&inputs.gold)?;
    let batch = pseudo_label(teacher.as_ref(), &state.pool, &contexts, inputs.prompt, i)?;
    let n_pseudo_labeled = batch.examples.len();
    let estimator = estimator_desc.build(&inputs.gold)?;
    let seed_blank = seed_blank_rate(inputs.labeled);
    let mut selection = score_and_filter(
        batch.examples,
        estimator.as_ref(),
        &contexts,
        inputs.prompt,
        cfg,
        seed_blank,
    )?;
    selection.n_failed += batch.n_failed;
    if cfg.selection == SelectionStrategy::Vanilla {
        let count = selection.selected.len();
        selection = select_vanilla(selection, count, cfg.seed ^ u64::from(i), cfg, seed_blank);
    }
    jsonl::write(&staging.file(SELECTION_LEDGER), selection.ledger())?;

    let mut transferred = state.transferred.clone();
    transferred.extend(selection.selected.iter().cloned());
    let moved: HashSet<&TurnRef> = selection.selected.iter().map(|e| &e.turn).collect();
    let pool: Vec<TurnRef> = state
        .pool
        .iter()
        .filter(|t| !moved.contains(t))
        .cloned()
        .collect();

    let records = generator_records(inputs.labeled, &transferred, &contexts, inputs.prompt)?;
    let train_file = staging.file(VALUES_TRAIN_FILE);
    jsonl::write(&train_file, &records)?;
    let student = inputs.trainer.train(&TrainJob {
        task: TrainTask::Values,
        train_file,
        out_dir: staging.file("values-model"),
        iteration: i,
    })?;
    let student_backend = student.backend.build(&inputs.gold)?;
    let tla = validation_tla(student_backend.as_ref(), inputs.valid, inputs.prompt)?;

    let previous = state.reports.last().map(|r| r.validation_tla);
    let stop_reason = match previous {
        Some(prev) if tla <= prev => Some(StopReason::NoImprovement),
        _ if i >= cfg.max_iterations => Some(StopReason::MaxIterations),
        _ => None,
    };
    let report = IterationReport {
        iteration: i,
        n_pseudo_labeled,
        n_failed: selection.n_failed,
        n_selected: selection.selected.len(),
        blank_rate_selected: selection.blank_rate_selected,
        blank_rate_warning: selection.blank_rate_warning,
        validation_tla: tla,
        labeled_size: state.seed_turns + transferred.len(),
        pool_size: pool.len(),
        stopped: stop_reason.is_some(),
        stop_reason,
    };
    jsonl::write_json(&staging.file(REPORT_FILE), &report)?;

    let best = match &state.best {
        Some(b) if b.validation_tla >= tla => Some(b.clone()),
        _ => Some(BestModel {
            iteration: i,
            validation_tla: tla,
            teacher: student.backend.clone(),
        }),
    };
    let mut reports = state.reports.clone();
    reports.push(report.clone());
    let next = LoopState {
        iteration: i,
        config: cfg.clone(),
        teacher: student.backend,
        estimator: estimator_desc,
        estimator_trained,
        baseline_tla: state.baseline_tla,
        seed_turns: state.seed_turns,
        transferred,
        pool,
        reports,
        best,
    };
    store.commit(staging, &next)?;
    info!(
        iteration = i,
        selected = report.n_selected,
        tla = report.validation_tla,
        "iteration committed"
    );
    Ok((next, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainOutcome {
    pub baseline_tla: f64,
    pub reports: Vec<IterationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<BestModel>,
}

/// Run or resume the loop in `inputs.work_dir` until it stops.
pub fn run_self_training(
    inputs: &SelfTrainInputs<'_>,
    cfg: &SelfTrainConfig,
) -> Result<SelfTrainOutcome> {
    cfg.validate()?;
    let store = inputs.store();
    let mut state = match store.load_state::<LoopState>()? {
        Some(s) if &s.config == cfg => s,
        Some(_) => {
            return Err(Error::data(
                store.state_path(),
                "work dir holds self-training state from a different configuration",
            ))
        }
        None => {
            let s = initial_state(inputs, cfg)?;
            jsonl::write_json(&store.state_path(), &s)?;
            s
        }
    };
    while !state.stopped() {
        state = run_iteration(inputs, &state)?.0;
    }
    Ok(SelfTrainOutcome {
        baseline_tla: state.baseline_tla,
        reports: state.reports,
        best: state.best,
    })
}
