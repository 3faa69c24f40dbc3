//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Set `MULTIWOZ21_DIR` to also run the corpus checks
//! on a MultiWOZ 2.1 directory.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dstkit::backends::{
    Backend, BackendDescriptor, GoldIndex, NoiseProfile, NoisyBackend, OracleBackend, VerdictClass,
};
use dstkit::corpus::synthetic::{generate, SyntheticConfig};
use dstkit::corpus::{
    default_domain_filter, derive_all_turn_labels, derive_turn_labels, ingest, sample_split,
    Dialogue,
};
use dstkit::metrics::{estimator_f1, jga, tla, DialogueStates};
use dstkit::negsample::{synth_dataset, SamplerConfig};
use dstkit::normalize::{normalize_text, SubstitutionTable};
use dstkit::pipeline::{evaluate, Pipeline};
use dstkit::prompting::{build_estimator_input, PromptConfig};
use dstkit::selftrain::trainer::ScheduledTrainer;
use dstkit::selftrain::{
    apply_threshold, pseudo_label, run_self_training, score, select_vanilla, turn_refs, Contexts,
    PseudoExample, SelfTrainConfig, SelfTrainInputs, StopReason,
};
use dstkit::statecore::{accumulate, decode_values, encode_values, BeliefState, TurnRef, ValueSet};
use dstkit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Splits = (Vec<Dialogue>, Vec<Dialogue>, Vec<Dialogue>);
/// Per dialogue id, per turn, the state as slot-value pairs.
type RawStates = Vec<(String, Vec<Vec<(String, String)>>)>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn show(e: Error) -> String {
    e.to_string()
}

fn corpus_dir() -> Option<PathBuf> {
    std::env::var_os("MULTIWOZ21_DIR").map(PathBuf::from)
}

fn synthetic(dialogues: usize, seed: u64) -> Vec<Dialogue> {
    generate(&SyntheticConfig {
        dialogues,
        seed,
        ..Default::default()
    })
}

/// Labeled splits of the real corpus, if configured.
fn real_corpus() -> Result<Option<Splits>, String> {
    let Some(dir) = corpus_dir() else {
        return Ok(None);
    };
    let c = ingest(&dir, &default_domain_filter()).map_err(show)?;
    Ok(Some((
        derive_all_turn_labels(&c.train).map_err(show)?,
        derive_all_turn_labels(&c.valid).map_err(show)?,
        derive_all_turn_labels(&c.test).map_err(show)?,
    )))
}

fn oracle_scores(dialogues: &[Dialogue]) -> Result<(f64, f64), String> {
    let gold = Arc::new(GoldIndex::from_dialogues(dialogues));
    let oracle: Arc<dyn Backend> = Arc::new(OracleBackend::new(gold));
    let pipeline = Pipeline::new(oracle.clone(), oracle, PromptConfig::default());
    let stripped: Vec<Dialogue> = dialogues.iter().map(Dialogue::stripped).collect();
    let preds = pipeline.predict(&stripped).map_err(show)?;
    let report = evaluate(&preds, dialogues).map_err(show)?;
    Ok((report.tla.value, report.jga.value))
}

fn oracle_exactness() -> Outcome {
    let mut notes = Vec::new();
    for (name, ds) in [
        ("synthetic-a", synthetic(300, 1)),
        ("synthetic-b", synthetic(300, 2)),
    ] {
        let (t, j) = oracle_scores(&ds)?;
        ensure(t == 1.0 && j == 1.0, || format!("{name}: TLA={t} JGA={j}"))?;
        notes.push(format!("{name} TLA=1.000 JGA=1.000"));
    }
    match real_corpus()? {
        Some((_, valid, _)) => {
            let start = Instant::now();
            let (t, j) = oracle_scores(&valid)?;
            let took = start.elapsed();
            ensure(t == 1.0 && j == 1.0, || format!("dev set: TLA={t} JGA={j}"))?;
            ensure(took < Duration::from_secs(60), || {
                format!("dev set took {took:?}")
            })?;
            notes.push(format!(
                "dev set ({} dialogues) TLA=1.000 JGA=1.000 in {took:.1?}",
                valid.len()
            ));
        }
        None => notes.push("dev set skipped (MULTIWOZ21_DIR unset)".into()),
    }
    Ok(notes.join("; "))
}

fn reconstructs(dialogues: &[Dialogue]) -> Result<usize, String> {
    for d in dialogues {
        let relabeled = derive_turn_labels(d).map_err(show)?;
        let labels: Vec<_> = relabeled
            .turns
            .iter()
            .map(|t| t.gold_turn_label.clone().expect("derived"))
            .collect();
        for (t, folded) in d.turns.iter().zip(accumulate(&labels)) {
            let gold = serde_json::to_vec(t.gold_state.as_ref().expect("labeled")).unwrap();
            ensure(gold == serde_json::to_vec(&folded).unwrap(), || {
                format!("{} turn {} differs", d.dialogue_id, t.turn_index)
            })?;
        }
    }
    Ok(dialogues.len())
}

fn round_trip() -> Outcome {
    let mut n = reconstructs(&synthetic(2000, 3))?;
    let mut note = "real corpus skipped (MULTIWOZ21_DIR unset)".to_string();
    if let Some((train, valid, test)) = real_corpus()? {
        let real: usize = [train, valid, test]
            .iter()
            .map(|s| reconstructs(s))
            .sum::<Result<_, _>>()?;
        n += real;
        note = format!("{real} real dialogues");
    }
    Ok(format!("{n} dialogues reconstructed byte-exactly; {note}"))
}

/// Unlabeled pool with gold answers for local backends.
struct Pool {
    stripped: Vec<Dialogue>,
    gold: Arc<GoldIndex>,
}

impl Pool {
    fn new(dialogues: usize, seed: u64) -> Self {
        let all = synthetic(dialogues, seed);
        let split = sample_split(&all, 0.05, 10).expect("valid ratio");
        Self {
            stripped: split.unlabeled,
            gold: Arc::new(GoldIndex::from_dialogues(&all)),
        }
    }

    fn gold_values(&self, turn: &TurnRef) -> &ValueSet {
        &self.gold.get(turn).expect("gold turn").values
    }

    fn is_wrong(&self, e: &PseudoExample) -> bool {
        !e.teacher_values.same_set(self.gold_values(&e.turn))
    }

    /// Probability that the noisy teacher mislabels `turn`.
    fn error_prob(&self, turn: &TurnRef, p: &NoiseProfile) -> f64 {
        let g = self.gold.get(turn).expect("gold turn");
        let injectable = !g.prior_values.difference(&g.values).is_empty();
        let keep_all = (1.0 - p.drop_prob).powi(g.values.len() as i32);
        1.0 - keep_all * (1.0 - if injectable { p.inject_prob } else { 0.0 })
    }

    fn scored(
        &self,
        teacher: &NoiseProfile,
        estimator: &dyn Backend,
    ) -> Result<Vec<PseudoExample>, String> {
        let contexts = Contexts::new(&self.stripped);
        let prompt = PromptConfig::default();
        let teacher = NoisyBackend::new(self.gold.clone(), teacher.clone());
        let batch = pseudo_label(&teacher, &turn_refs(&self.stripped), &contexts, &prompt, 1)
            .map_err(show)?;
        let (scored, failed) =
            score(&batch.examples, estimator, &contexts, &prompt).map_err(show)?;
        ensure(failed == 0 && batch.n_failed == 0, || {
            "backend failures".into()
        })?;
        Ok(scored)
    }
}

fn teacher_profile() -> NoiseProfile {
    NoiseProfile {
        drop_prob: 0.3,
        inject_prob: 0.1,
        flip_verdict_prob: 0.0,
        seed: 7,
    }
}

fn selection_soundness() -> Outcome {
    let pool = Pool::new(1500, 4);
    let profile = teacher_profile();
    let oracle = OracleBackend::new(pool.gold.clone());
    let scored = pool.scored(&profile, &oracle)?;
    let cfg = SelfTrainConfig::default();
    let chosen = apply_threshold(scored, &cfg, f64::INFINITY).map_err(show)?;
    let wrong = chosen.selected.iter().filter(|e| pool.is_wrong(e)).count();
    ensure(wrong == 0, || {
        format!("{wrong} wrong pseudo-labels admitted")
    })?;
    let m = chosen.selected.len();
    let total = m + chosen.rejected.len();

    let vanilla = select_vanilla(chosen, m, 99, &cfg, f64::INFINITY);
    ensure(vanilla.selected.len() == m, || {
        "vanilla sample size differs".into()
    })?;
    let observed = vanilla.selected.iter().filter(|e| pool.is_wrong(e)).count() as f64;
    let ps: Vec<f64> = vanilla
        .selected
        .iter()
        .map(|e| pool.error_prob(&e.turn, &profile))
        .collect();
    let expected: f64 = ps.iter().sum();
    let sigma = ps.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt();
    let z = (observed - expected) / sigma;
    ensure(z.abs() <= 2.0, || {
        format!("vanilla errors {observed} vs expected {expected:.1} (z={z:.2})")
    })?;
    ensure(observed > 0.0, || {
        "vanilla admitted no errors; contrast not shown".into()
    })?;
    Ok(format!(
        "estimator kept {m}/{total} with 0 errors; vanilla kept {m} with error rate {:.3} vs expected {:.3} (z={z:+.2})",
        observed / m as f64,
        expected / m as f64
    ))
}

fn selftrain_dynamics() -> Outcome {
    let all = synthetic(1200, 5);
    let (pool_part, valid) = all.split_at(1000);
    let split = sample_split(pool_part, 0.05, 10).map_err(show)?;
    let gold = Arc::new(GoldIndex::from_dialogues(&all));
    let student = |drop_prob, seed| NoiseProfile {
        drop_prob,
        seed,
        ..Default::default()
    };
    let trainer = ScheduledTrainer::new(
        vec![student(0.15, 2), student(0.25, 3)],
        BackendDescriptor::oracle(),
    )
    .map_err(show)?;
    let cfg = SelfTrainConfig {
        teacher: BackendDescriptor::noisy(teacher_profile()),
        ..Default::default()
    };
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let prompt = PromptConfig::default();
    let sampler = SamplerConfig::default();
    let inputs = SelfTrainInputs {
        labeled: &split.train,
        unlabeled: &split.unlabeled,
        valid,
        gold,
        prompt: &prompt,
        sampler: &sampler,
        trainer: &trainer,
        work_dir: work.path(),
    };
    let out = run_self_training(&inputs, &cfg).map_err(show)?;
    let tlas: Vec<f64> = out.reports.iter().map(|r| r.validation_tla).collect();
    let path = std::iter::once(out.baseline_tla)
        .chain(tlas.iter().copied())
        .map(|t| format!("{:.2}", 100.0 * t))
        .collect::<Vec<_>>()
        .join(" -> ");
    ensure(tlas.len() == 2, || {
        format!("{} iterations: {path}", tlas.len())
    })?;
    ensure(tlas[0] > out.baseline_tla && tlas[1] < tlas[0], || {
        format!("TLA {path}")
    })?;
    let last = out.reports.last().expect("two reports");
    ensure(
        last.stopped && last.stop_reason == Some(StopReason::NoImprovement),
        || format!("stopped by {:?}", last.stop_reason),
    )?;
    ensure(out.best.as_ref().map(|b| b.iteration) == Some(1), || {
        "best is not iteration 1".into()
    })?;
    Ok(format!("validation TLA {path}, stopped by no-improvement"))
}

fn sampler_soundness() -> Outcome {
    let start = Instant::now();
    let dialogues = synthetic(7000, 6);
    let cfg = SamplerConfig {
        seed: 6,
        ..Default::default()
    };
    let data = synth_dataset(&dialogues, &cfg);
    let examples: Vec<_> = data.train.iter().chain(&data.valid).take(100_000).collect();
    ensure(examples.len() == 100_000, || {
        format!("only {} examples", examples.len())
    })?;
    let gold = Arc::new(GoldIndex::from_dialogues(&dialogues));
    let oracle = OracleBackend::new(gold.clone());
    let contexts = Contexts::new(&dialogues);
    let prompt = PromptConfig::default();
    let failures: Vec<String> = examples
        .par_iter()
        .filter_map(|e| {
            let g = &gold.get(&e.turn).ok()?.values;
            if !e.is_sound(g) {
                return Some(format!("{} labeled {} unsound", e.turn, e.label));
            }
            let ctx = contexts.get(&e.turn).ok()?;
            let input = build_estimator_input(&ctx, &e.candidate, &prompt);
            match oracle.estimate_values(&input, &e.candidate, &e.turn) {
                Ok(v) if v.argmax() == e.label => None,
                Ok(v) => Some(format!("{} oracle says {}", e.turn, v.argmax())),
                Err(err) => Some(err.to_string()),
            }
        })
        .collect();
    ensure(failures.is_empty(), || {
        format!("{} failures, first: {}", failures.len(), failures[0])
    })?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    let mut hist = [0usize; 3];
    for e in &examples {
        hist[e.label.index() as usize] += 1;
    }
    Ok(format!(
        "100000 examples sound and reproduced (correct/incomplete/incorrect {}/{}/{}) in {took:.1?}",
        hist[0], hist[1], hist[2]
    ))
}

const ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'n', 'o', 'r', 's', 't', 'z', '0', '1', '7', '9', ' ', ':', '\'', '-',
    '&', '.', ',', 'é', 'ü', '(', ')', '/',
];

fn random_value(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..16);
    (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}

fn codec_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut non_empty = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(0..7);
        let vs = ValueSet::new((0..n).map(|_| random_value(&mut rng)));
        non_empty += usize::from(!vs.is_empty());
        let encoded = encode_values(&vs).map_err(show)?;
        let back = decode_values(&encoded);
        ensure(back == vs, || format!("{vs:?} -> {encoded:?} -> {back:?}"))?;
    }
    let mut rejected = 0;
    for _ in 0..1_000 {
        let bad = format!("{}|{}", random_value(&mut rng), random_value(&mut rng));
        let vs = ValueSet::new([random_value(&mut rng), bad]);
        match encode_values(&vs) {
            Err(Error::Encoding { value }) => {
                ensure(value.contains('|'), || {
                    format!("wrong value reported: {value}")
                })?;
                rejected += 1;
            }
            other => return Err(format!("{vs:?} encoded as {other:?}")),
        }
    }
    Ok(format!(
        "10000 sets round-trip ({non_empty} non-empty); {rejected} delimiter-bearing sets rejected"
    ))
}

mod brute {
    //! Nested-loop reference metrics.

    use super::*;

    fn canon(v: &str) -> String {
        SubstitutionTable::builtin()
            .canonical(&normalize_text(v))
            .to_string()
    }

    fn contained(a: &[String], b: &[String]) -> bool {
        for x in a {
            let mut found = false;
            for y in b {
                if canon(x) == canon(y) {
                    found = true;
                }
            }
            if !found {
                return false;
            }
        }
        true
    }

    pub fn tla(pred: &[Vec<String>], gold: &[Vec<String>]) -> f64 {
        let mut correct = 0;
        for i in 0..gold.len() {
            if contained(&pred[i], &gold[i]) && contained(&gold[i], &pred[i]) {
                correct += 1;
            }
        }
        correct as f64 / gold.len() as f64
    }

    fn pairs_contained(a: &[(String, String)], b: &[(String, String)]) -> bool {
        for (s, v) in a {
            let mut found = false;
            for (s2, v2) in b {
                if s == s2 && canon(v) == canon(v2) {
                    found = true;
                }
            }
            if !found {
                return false;
            }
        }
        true
    }

    pub fn jga(pred: &[Vec<Vec<(String, String)>>], gold: &[Vec<Vec<(String, String)>>]) -> f64 {
        let mut correct = 0;
        let mut total = 0;
        for d in 0..gold.len() {
            for t in 0..gold[d].len() {
                total += 1;
                if pairs_contained(&pred[d][t], &gold[d][t])
                    && pairs_contained(&gold[d][t], &pred[d][t])
                {
                    correct += 1;
                }
            }
        }
        correct as f64 / total as f64
    }

    /// Per class: precision, recall, f1.
    pub fn f1(pred: &[usize], gold: &[usize]) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for c in 0..3 {
            let (mut tp, mut pp, mut ap) = (0, 0, 0);
            for i in 0..gold.len() {
                if pred[i] == c {
                    pp += 1;
                }
                if gold[i] == c {
                    ap += 1;
                }
                if pred[i] == c && gold[i] == c {
                    tp += 1;
                }
            }
            let p = if pp == 0 { 0.0 } else { tp as f64 / pp as f64 };
            let r = if ap == 0 { 0.0 } else { tp as f64 / ap as f64 };
            let f = if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            };
            out.push([p, r, f]);
        }
        out
    }
}

const SLOTS: [&str; 5] = [
    "hotel-area",
    "hotel-type",
    "train-day",
    "taxi-leaveat",
    "restaurant-food",
];
const VALUES: [&str; 9] = [
    "centre",
    "center",
    "north",
    "guest house",
    "guesthouse",
    "monday",
    "17:00",
    "dontcare",
    "any",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn perturb_values(rng: &mut ChaCha8Rng, gold: &[String]) -> Vec<String> {
    let mut out: Vec<String> = gold
        .iter()
        .filter(|_| rng.random_bool(0.85))
        .cloned()
        .collect();
    if rng.random_bool(0.2) {
        out.push(pick(rng, &VALUES).to_string());
    }
    out
}

fn metric_equivalence() -> Outcome {
    let mut compared = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gold_states = Vec::new();
        let mut pred_states = Vec::new();
        let mut gold_sets = Vec::new();
        let mut pred_sets = Vec::new();
        for d in 0..rng.random_range(1..5) {
            let mut g_turns = Vec::new();
            let mut p_turns = Vec::new();
            for _ in 0..rng.random_range(1..7) {
                let mut g: BTreeMap<String, String> = BTreeMap::new();
                for _ in 0..rng.random_range(0..4) {
                    g.insert(
                        pick(&mut rng, &SLOTS).into(),
                        pick(&mut rng, &VALUES).into(),
                    );
                }
                let mut p = g.clone();
                if rng.random_bool(0.3) {
                    if let Some(k) = p.keys().next().cloned() {
                        p.remove(&k);
                    }
                }
                if rng.random_bool(0.2) {
                    p.insert(
                        pick(&mut rng, &SLOTS).into(),
                        pick(&mut rng, &VALUES).into(),
                    );
                }
                let gv: Vec<String> = g.values().cloned().collect();
                pred_sets.push(perturb_values(&mut rng, &gv));
                gold_sets.push(gv);
                g_turns.push(g.into_iter().collect::<Vec<_>>());
                p_turns.push(p.into_iter().collect::<Vec<_>>());
            }
            gold_states.push((format!("D{d}"), g_turns));
            pred_states.push((format!("D{d}"), p_turns));
        }
        let n = gold_sets.len();
        let gold_cls: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pred_cls: Vec<usize> = gold_cls
            .iter()
            .map(|&c| {
                if rng.random_bool(0.6) {
                    c
                } else {
                    rng.random_range(0..3)
                }
            })
            .collect();

        let to_sets = |xs: &[Vec<String>]| xs.iter().map(ValueSet::new).collect::<Vec<_>>();
        let to_states = |xs: &RawStates| {
            xs.iter()
                .map(|(id, turns)| DialogueStates {
                    dialogue_id: id.clone(),
                    states: turns
                        .iter()
                        .map(|t| t.iter().cloned().collect::<BeliefState>())
                        .collect(),
                })
                .collect::<Vec<_>>()
        };
        let fast_tla = tla(&to_sets(&pred_sets), &to_sets(&gold_sets))
            .map_err(show)?
            .value;
        let slow_tla = brute::tla(&pred_sets, &gold_sets);
        ensure(fast_tla == slow_tla, || {
            format!("seed {seed}: TLA {fast_tla} vs {slow_tla}")
        })?;

        let fast_jga = jga(&to_states(&pred_states), &to_states(&gold_states))
            .map_err(show)?
            .value;
        let strip = |xs: &RawStates| xs.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>();
        let slow_jga = brute::jga(&strip(&pred_states), &strip(&gold_states));
        ensure(fast_jga == slow_jga, || {
            format!("seed {seed}: JGA {fast_jga} vs {slow_jga}")
        })?;

        let cls = |xs: &[usize]| {
            xs.iter()
                .map(|&i| VerdictClass::from_index(i as u8).unwrap())
                .collect::<Vec<_>>()
        };
        let report = estimator_f1(&cls(&pred_cls), &cls(&gold_cls)).map_err(show)?;
        for (c, [p, r, f]) in brute::f1(&pred_cls, &gold_cls).into_iter().enumerate() {
            let s = &report.classes[c];
            ensure(s.precision == p && s.recall == r && s.f1 == f, || {
                format!("seed {seed} class {c}: {s:?} vs ({p}, {r}, {f})")
            })?;
        }
        compared += 1;
    }
    Ok(format!(
        "{compared} randomized fixtures, TLA/JGA/F1 exactly equal"
    ))
}

fn threshold_monotonicity() -> Outcome {
    const THRESHOLDS: [f64; 5] = [0.5, 0.8, 0.9, 0.98, 0.999];
    let pool = Pool::new(1500, 9);
    let estimator = NoisyBackend::new(
        pool.gold.clone(),
        NoiseProfile {
            flip_verdict_prob: 0.2,
            seed: 11,
            ..Default::default()
        },
    );
    let scored = pool.scored(&teacher_profile(), &estimator)?;
    let mut rows = Vec::new();
    for t in THRESHOLDS {
        let cfg = SelfTrainConfig {
            threshold: t,
            ..Default::default()
        };
        let sel = apply_threshold(scored.clone(), &cfg, f64::INFINITY).map_err(show)?;
        let n = sel.selected.len();
        ensure(n > 0, || format!("nothing selected at {t}"))?;
        let good = sel.selected.iter().filter(|e| !pool.is_wrong(e)).count();
        rows.push((t, n, good as f64 / n as f64));
    }
    for w in rows.windows(2) {
        let ((t0, n0, p0), (t1, n1, p1)) = (w[0], w[1]);
        ensure(n1 <= n0, || {
            format!("n_selected rose from {n0} at {t0} to {n1} at {t1}")
        })?;
        ensure(p1 >= p0, || {
            format!("precision fell from {p0} at {t0} to {p1} at {t1}")
        })?;
    }
    Ok(rows
        .iter()
        .map(|(t, n, p)| format!("{t}: n={n} precision={p:.3}"))
        .collect::<Vec<_>>()
        .join(", "))
}

fn main() -> ExitCode {
    let checks: [Check; 8] = [
        ("oracle exactness", oracle_exactness),
        ("round-trip reconstruction", round_trip),
        ("selection soundness", selection_soundness),
        ("self-training dynamics", selftrain_dynamics),
        ("negative-sampler label soundness", sampler_soundness),
        ("codec property suite", codec_suite),
        ("metric oracle equivalence", metric_equivalence),
        ("threshold monotonicity", threshold_monotonicity),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
