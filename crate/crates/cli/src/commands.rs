use std::path::Path;
use std::sync::Arc;

use dstkit::backends::{GoldIndex, SharedBackend};
use dstkit::corpus::records::{read_dialogues, write_dialogues};
use dstkit::corpus::synthetic::{generate, to_multiwoz_json, SyntheticConfig};
use dstkit::corpus::{derive_all_turn_labels, ingest, sample_split, Dialogue};
use dstkit::jsonl;
use dstkit::negsample;
use dstkit::pipeline::{self, DialoguePrediction, Pipeline};
use dstkit::selftrain::trainer::{TrainJob, TrainTask};
use dstkit::selftrain::{
    self, apply_threshold, pseudo_label, score, slot_records, Contexts, PseudoExample,
    SelfTrainInputs,
};
use serde::Serialize;

use crate::config::{with_kind, RunConfig};
use crate::error::CliError;
use crate::workdir::WorkDir;
use crate::Command;

const CORPUS_SPLITS: [&str; 3] = ["train", "valid", "test"];
const LABELED: &str = "split/labeled.jsonl";
const UNLABELED: &str = "split/unlabeled.jsonl";
const SPLIT_MANIFEST: &str = "split/manifest.json";
const ESTIMATOR_TRAIN: &str = "estimator/train.jsonl";
const ESTIMATOR_VALID: &str = "estimator/valid.jsonl";
const LEDGER: &str = "pseudo/ledger.jsonl";
const SELECTED: &str = "pseudo/selected.jsonl";
const REJECTED: &str = "pseudo/rejected.jsonl";
const BLANK_REPORT: &str = "pseudo/blank-rate.json";
const SELFTRAIN_DIR: &str = "selftrain";
const OUTCOME: &str = "selftrain/outcome.json";
const SLOT_TRAIN: &str = "slots/train.jsonl";
const SLOT_MODEL: &str = "slots/model";
const SLOT_BACKEND: &str = "slots/backend.json";

fn corpus_file(split: &str) -> String {
    format!("corpus/{split}.jsonl")
}

pub fn run(
    config: Option<&Path>,
    work_dir: Option<&Path>,
    command: Command,
) -> Result<(), CliError> {
    if let Command::SynthCorpus {
        out,
        dialogues,
        seed,
        eval_share,
    } = &command
    {
        return synth_corpus(out, *dialogues, *seed, *eval_share);
    }
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = work_dir {
        cfg.paths.work_dir = Some(w.to_path_buf());
    }
    cfg.apply_env();
    cfg.validate()?;
    if let Command::DumpConfig { out } = &command {
        let text = cfg.to_toml()?;
        return match out {
            Some(path) => Ok(jsonl::write_atomic(path, text.as_bytes())?),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let root =
        cfg.paths.work_dir.clone().ok_or_else(|| {
            CliError::config("no work dir: set paths.work_dir or pass --work-dir")
        })?;
    let mut wd = WorkDir::open(&root)?;
    match command {
        Command::Ingest { corpus } => cmd_ingest(&mut wd, &cfg, corpus.as_deref()),
        Command::DeriveLabels => cmd_derive_labels(&mut wd),
        Command::Split { ratio, seed } => cmd_split(
            &mut wd,
            ratio.unwrap_or(cfg.split.ratio),
            seed.unwrap_or(cfg.split.seed),
        ),
        Command::SynthNegatives { seed } => {
            let mut sampler = cfg.sampler.clone();
            if let Some(s) = seed {
                sampler.seed = s;
            }
            cmd_synth_negatives(&mut wd, &cfg, &sampler)
        }
        Command::PseudoLabel { backend } => {
            if let Some(k) = backend {
                cfg.selftrain.teacher = with_kind(&cfg.selftrain.teacher, k)?;
            }
            cmd_pseudo_label(&mut wd, &cfg)
        }
        Command::Filter {
            threshold,
            ledger,
            backend,
        } => {
            if let Some(t) = threshold {
                cfg.selftrain.threshold = t;
                cfg.selftrain.validate().map_err(CliError::config_from)?;
            }
            if let Some(k) = backend {
                cfg.selftrain.estimator = with_kind(&cfg.selftrain.estimator, k)?;
            }
            cmd_filter(&mut wd, &cfg, ledger.as_deref())
        }
        Command::Selftrain => cmd_selftrain(&mut wd, &cfg),
        Command::TrainSlots => cmd_train_slots(&mut wd, &cfg),
        Command::Predict { split, backend } => {
            apply_pipeline_kind(&mut cfg, backend)?;
            cmd_predict(&mut wd, &cfg, split.name()).map(|_| ())
        }
        Command::Evaluate {
            split,
            predictions,
            backend,
        } => {
            apply_pipeline_kind(&mut cfg, backend)?;
            cmd_evaluate(&mut wd, &cfg, split.name(), predictions.as_deref())
        }
        Command::DumpConfig { .. } | Command::SynthCorpus { .. } => unreachable!("handled above"),
    }
}

fn apply_pipeline_kind(
    cfg: &mut RunConfig,
    kind: Option<crate::config::KindArg>,
) -> Result<(), CliError> {
    if let Some(k) = kind {
        cfg.backends.values = with_kind(&cfg.backends.values, k)?;
        cfg.backends.slots = with_kind(&cfg.backends.slots, k)?;
    }
    Ok(())
}

fn cmd_ingest(wd: &mut WorkDir, cfg: &RunConfig, corpus: Option<&Path>) -> Result<(), CliError> {
    let root = corpus
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.corpus.clone())
        .ok_or_else(|| CliError::config("no corpus: set paths.corpus or pass --corpus"))?;
    let c = ingest(&root, &cfg.domain_filter())?;
    let mut outputs = Vec::new();
    for (split, dialogues) in CORPUS_SPLITS.iter().zip([&c.train, &c.valid, &c.test]) {
        let rel = corpus_file(split);
        write_dialogues(&wd.path(&rel), dialogues)?;
        outputs.push(rel);
    }
    wd.record_stage(
        "ingest",
        &outputs.iter().map(String::as_str).collect::<Vec<_>>(),
    )?;
    println!(
        "ingested train={} valid={} test={}",
        c.train.len(),
        c.valid.len(),
        c.test.len()
    );
    Ok(())
}

fn cmd_derive_labels(wd: &mut WorkDir) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    let mut turns = 0;
    for split in CORPUS_SPLITS {
        let rel = corpus_file(split);
        let path = wd.input(&rel, "ingest")?;
        let labeled = derive_all_turn_labels(&read_dialogues(&path)?)?;
        turns += labeled.iter().map(|d| d.turns.len()).sum::<usize>();
        write_dialogues(&path, &labeled)?;
        outputs.push(rel);
    }
    wd.record_stage(
        "derive-labels",
        &outputs.iter().map(String::as_str).collect::<Vec<_>>(),
    )?;
    println!("labeled turns={turns}");
    Ok(())
}

fn read_labeled(wd: &WorkDir, rel: &str, made_by: &str) -> Result<Vec<Dialogue>, CliError> {
    let path = wd.input(rel, made_by)?;
    let dialogues = read_dialogues(&path)?;
    if let Some(d) = dialogues.iter().find(|d| !d.is_labeled()) {
        return Err(CliError::data(format!(
            "{}: dialogue {} has no turn labels; run `derive-labels` first",
            path.display(),
            d.dialogue_id
        )));
    }
    Ok(dialogues)
}

fn cmd_split(wd: &mut WorkDir, ratio: f64, seed: u64) -> Result<(), CliError> {
    let pool = read_labeled(wd, &corpus_file("train"), "derive-labels")?;
    let split = sample_split(&pool, ratio, seed).map_err(CliError::config_from)?;
    write_dialogues(&wd.path(LABELED), &split.train)?;
    write_dialogues(&wd.path(UNLABELED), &split.unlabeled)?;
    jsonl::write_json(&wd.path(SPLIT_MANIFEST), &split.manifest())?;
    wd.record_stage("split", &[SPLIT_MANIFEST, LABELED, UNLABELED])?;
    println!(
        "split ratio={ratio} seed={seed} labeled={} unlabeled={}",
        split.train.len(),
        split.unlabeled.len()
    );
    Ok(())
}

fn cmd_synth_negatives(
    wd: &mut WorkDir,
    cfg: &RunConfig,
    sampler: &negsample::SamplerConfig,
) -> Result<(), CliError> {
    let labeled = read_labeled(wd, LABELED, "split")?;
    let dataset = negsample::synth_dataset(&labeled, sampler);
    let train = negsample::to_records(&labeled, &dataset.train, &cfg.prompt)?;
    let valid = negsample::to_records(&labeled, &dataset.valid, &cfg.prompt)?;
    jsonl::write(&wd.path(ESTIMATOR_TRAIN), &train)?;
    jsonl::write(&wd.path(ESTIMATOR_VALID), &valid)?;
    wd.record_stage("synth-negatives", &[ESTIMATOR_TRAIN, ESTIMATOR_VALID])?;
    let [c, inc, wrong] = dataset.label_histogram();
    println!(
        "estimator examples train={} valid={} correct={c} incomplete={inc} incorrect={wrong}",
        train.len(),
        valid.len()
    );
    Ok(())
}

/// Gold answers for local backends, from every labeled corpus file present.
fn load_gold(wd: &WorkDir) -> Result<Arc<GoldIndex>, CliError> {
    let mut all = Vec::new();
    for split in CORPUS_SPLITS {
        let rel = corpus_file(split);
        if wd.path(&rel).exists() {
            all.extend(read_labeled(wd, &rel, "derive-labels")?);
        }
    }
    Ok(Arc::new(GoldIndex::from_dialogues(&all)))
}

fn cmd_pseudo_label(wd: &mut WorkDir, cfg: &RunConfig) -> Result<(), CliError> {
    let unlabeled = read_dialogues(&wd.input(UNLABELED, "split")?)?;
    let gold = load_gold(wd)?;
    let teacher = cfg.selftrain.teacher.build(&gold)?;
    let contexts = Contexts::new(&unlabeled);
    let turns = selftrain::turn_refs(&unlabeled);
    let batch = pseudo_label(teacher.as_ref(), &turns, &contexts, &cfg.prompt, 1)?;
    jsonl::write(&wd.path(LEDGER), &batch.examples)?;
    wd.record_stage("pseudo-label", &[LEDGER])?;
    println!(
        "pseudo-labeled turns={} failed={}",
        batch.examples.len(),
        batch.n_failed
    );
    Ok(())
}

#[derive(Serialize)]
struct BlankRateReport {
    threshold: f64,
    n_selected: usize,
    n_rejected: usize,
    n_failed: usize,
    blank_rate_selected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_blank_rate: Option<f64>,
    blank_rate_guard: f64,
    warning: bool,
}

fn cmd_filter(wd: &mut WorkDir, cfg: &RunConfig, ledger: Option<&Path>) -> Result<(), CliError> {
    let ledger_path = match ledger {
        Some(p) => p.to_path_buf(),
        None => wd.input(LEDGER, "pseudo-label")?,
    };
    let examples: Vec<PseudoExample> = jsonl::read(&ledger_path)?;
    let seed_blank = match wd.path(LABELED).exists() {
        true => Some(selftrain::seed_blank_rate(&read_labeled(
            wd, LABELED, "split",
        )?)),
        false => None,
    };
    // without a seed rate nothing can exceed the guard
    let seed_for_guard = seed_blank.unwrap_or(f64::INFINITY);
    let (mut scored, unscored): (Vec<_>, Vec<_>) =
        examples.into_iter().partition(|e| e.verdict.is_some());
    let mut n_failed = 0;
    if !unscored.is_empty() {
        let unlabeled = read_dialogues(&wd.input(UNLABELED, "split")?)?;
        let gold = load_gold(wd)?;
        let estimator = cfg.selftrain.estimator.build(&gold)?;
        let (more, failed) = score(
            &unscored,
            estimator.as_ref(),
            &Contexts::new(&unlabeled),
            &cfg.prompt,
        )?;
        scored.extend(more);
        scored.sort_by(|a, b| a.turn.cmp(&b.turn));
        n_failed = failed;
    }
    let mut selection = apply_threshold(scored, &cfg.selftrain, seed_for_guard)?;
    selection.n_failed = n_failed;
    jsonl::write(&wd.path(SELECTED), &selection.selected)?;
    jsonl::write(&wd.path(REJECTED), &selection.rejected)?;
    let report = BlankRateReport {
        threshold: cfg.selftrain.threshold,
        n_selected: selection.selected.len(),
        n_rejected: selection.rejected.len(),
        n_failed: selection.n_failed,
        blank_rate_selected: selection.blank_rate_selected,
        seed_blank_rate: seed_blank,
        blank_rate_guard: cfg.selftrain.blank_rate_guard,
        warning: selection.blank_rate_warning,
    };
    jsonl::write_json(&wd.path(BLANK_REPORT), &report)?;
    wd.record_stage("filter", &[SELECTED, REJECTED, BLANK_REPORT])?;
    println!(
        "selected={} rejected={} blank_rate={:.4}{}",
        report.n_selected,
        report.n_rejected,
        report.blank_rate_selected,
        if report.warning {
            " warning=blank-rate"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_selftrain(wd: &mut WorkDir, cfg: &RunConfig) -> Result<(), CliError> {
    let hook = cfg
        .selftrain
        .trainer
        .as_ref()
        .ok_or_else(|| CliError::config("selftrain.trainer is not configured"))?;
    let trainer = hook.build().map_err(CliError::config_from)?;
    let labeled = read_labeled(wd, LABELED, "split")?;
    let unlabeled = read_dialogues(&wd.input(UNLABELED, "split")?)?;
    let valid = read_labeled(wd, &corpus_file("valid"), "derive-labels")?;
    let gold = load_gold(wd)?;
    let store = wd.path(SELFTRAIN_DIR);
    let inputs = SelfTrainInputs {
        labeled: &labeled,
        unlabeled: &unlabeled,
        valid: &valid,
        gold,
        prompt: &cfg.prompt,
        sampler: &cfg.sampler,
        trainer: trainer.as_ref(),
        work_dir: &store,
    };
    let outcome = selftrain::run_self_training(&inputs, &cfg.selftrain)?;
    jsonl::write_json(&wd.path(OUTCOME), &outcome)?;
    wd.record_stage("selftrain", &[OUTCOME])?;
    println!("baseline validation_tla={:.4}", outcome.baseline_tla);
    for r in &outcome.reports {
        println!(
            "iteration={} pseudo_labeled={} selected={} blank_rate={:.4} validation_tla={:.4} pool={}{}",
            r.iteration,
            r.n_pseudo_labeled,
            r.n_selected,
            r.blank_rate_selected,
            r.validation_tla,
            r.pool_size,
            match r.stop_reason {
                Some(reason) => format!(" stopped={}", serde_json::to_string(&reason).unwrap_or_default().trim_matches('"')),
                None => String::new(),
            }
        );
    }
    if let Some(best) = &outcome.best {
        println!(
            "best iteration={} validation_tla={:.4}",
            best.iteration, best.validation_tla
        );
    }
    Ok(())
}

fn cmd_train_slots(wd: &mut WorkDir, cfg: &RunConfig) -> Result<(), CliError> {
    let labeled = read_labeled(wd, LABELED, "split")?;
    let records = slot_records(&labeled, &cfg.prompt)?;
    jsonl::write(&wd.path(SLOT_TRAIN), &records)?;
    let Some(hook) = cfg.selftrain.trainer.as_ref() else {
        wd.record_stage("train-slots", &[SLOT_TRAIN])?;
        println!("slot records={} trained=no", records.len());
        return Ok(());
    };
    let trainer = hook.build().map_err(CliError::config_from)?;
    let model = trainer.train(&TrainJob {
        task: TrainTask::Slot,
        train_file: wd.path(SLOT_TRAIN),
        out_dir: wd.path(SLOT_MODEL),
        iteration: 0,
    })?;
    jsonl::write_json(&wd.path(SLOT_BACKEND), &model.backend)?;
    wd.record_stage("train-slots", &[SLOT_TRAIN, SLOT_BACKEND])?;
    println!(
        "slot records={} trained=yes checkpoint={}",
        records.len(),
        model.checkpoint.display()
    );
    Ok(())
}

fn build_pipeline(wd: &WorkDir, cfg: &RunConfig) -> Result<Pipeline, CliError> {
    let gold = load_gold(wd)?;
    let values: SharedBackend = cfg.backends.values.build(&gold)?;
    let slots: SharedBackend = cfg.backends.slots.build(&gold)?;
    Ok(Pipeline::new(values, slots, cfg.prompt.clone()))
}

fn cmd_predict(
    wd: &mut WorkDir,
    cfg: &RunConfig,
    split: &str,
) -> Result<Vec<DialoguePrediction>, CliError> {
    let dialogues = read_dialogues(&wd.input(&corpus_file(split), "ingest")?)?;
    let stripped: Vec<Dialogue> = dialogues.iter().map(Dialogue::stripped).collect();
    let preds = build_pipeline(wd, cfg)?.predict(&stripped)?;
    let rel = format!("predictions/{split}.jsonl");
    jsonl::write(&wd.path(&rel), &preds)?;
    wd.record_stage(&format!("predict-{split}"), &[&rel])?;
    println!(
        "predicted dialogues={} turns={}",
        preds.len(),
        preds.iter().map(|p| p.turns.len()).sum::<usize>()
    );
    Ok(preds)
}

fn cmd_evaluate(
    wd: &mut WorkDir,
    cfg: &RunConfig,
    split: &str,
    predictions: Option<&Path>,
) -> Result<(), CliError> {
    let gold = read_labeled(wd, &corpus_file(split), "derive-labels")?;
    let preds = match predictions {
        Some(p) => jsonl::read(p)?,
        None => cmd_predict(wd, cfg, split)?,
    };
    let report = pipeline::evaluate(&preds, &gold).map_err(|e| CliError::data(e.to_string()))?;
    let rel = format!("reports/{split}.json");
    jsonl::write_json(&wd.path(&rel), &report)?;
    wd.record_stage(&format!("evaluate-{split}"), &[&rel])?;
    print!("{}", report.render_table());
    Ok(())
}

fn synth_corpus(out: &Path, dialogues: usize, seed: u64, eval_share: f64) -> Result<(), CliError> {
    if !(0.0..0.5).contains(&eval_share) {
        return Err(CliError::config(format!(
            "eval_share {eval_share} outside [0, 0.5)"
        )));
    }
    let generated = generate(&SyntheticConfig {
        dialogues,
        seed,
        ..Default::default()
    });
    let data = serde_json::to_vec(&to_multiwoz_json(&generated))
        .map_err(|e| CliError::data(format!("cannot render corpus: {e}")))?;
    jsonl::write_atomic(&out.join("data.json"), &data)?;
    let n_eval = (dialogues as f64 * eval_share).floor() as usize;
    let mut ids: Vec<&str> = generated.iter().map(|d| d.dialogue_id.as_str()).collect();
    ids.sort_unstable();
    let list = |ids: &[&str]| ids.iter().map(|i| format!("{i}\n")).collect::<String>();
    let (valid, rest) = ids.split_at(n_eval);
    let test = &rest[..n_eval.min(rest.len())];
    jsonl::write_atomic(&out.join("valListFile.txt"), list(valid).as_bytes())?;
    jsonl::write_atomic(&out.join("testListFile.txt"), list(test).as_bytes())?;
    println!(
        "wrote dialogues={dialogues} valid={} test={}",
        valid.len(),
        test.len()
    );
    Ok(())
}
