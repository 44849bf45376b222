//! Generators, oracles and whole-criterion checks shared by the integration
//! tests and the acceptance runner (which includes this file by path).
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::BufReader;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use taskbot_core::action::{parse_action, scope_for, ActionCode, ActionKind, ActionText, SessionPhase};
use taskbot_core::decision::{decide_pattern, evaluate_lines, DecisionContext, PatternBackend};
use taskbot_core::gateway::{Gateway, MockBackend};
use taskbot_core::orchestrator::{Catalog, Engine, ManualClock, MemoryStore, TurnStore, RESULTS_PAGE_SIZE};
use taskbot_core::retrieval::{tokenize, InvertedIndex, SearchDoc, BM25_B, BM25_K1};
use taskbot_core::taskgraph::{append_step, remove_step, reschedule_step, StepNode, TaskCursor, TaskDomain, TaskGraph};

pub const GOLDEN_CLOCK_MS: u64 = 1_760_000_000_000;
pub const GOLDEN_SESSION: &str = "golden";
/// exact_match of the pattern backend on `fixtures/ndp/dataset.jsonl`.
pub const PINNED_EXACT_MATCH: usize = 172;
pub const PINNED_TOTAL: usize = 200;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Seeded runner so every run explores the same cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

// ---------------------------------------------------------------- actions

pub fn arb_text() -> impl Strategy<Value = ActionText> {
    "[ a-zA-Z0-9\"\\\\'():,.?!éßЖ🍝-]{1,24}".prop_filter_map("blank", ActionText::new)
}

pub fn arb_action() -> impl Strategy<Value = ActionCode> {
    let index = (1u32..=u32::MAX).prop_map(|n| NonZeroU32::new(n).unwrap());
    prop_oneof![
        Just(ActionCode::Restart),
        Just(ActionCode::Next),
        Just(ActionCode::Previous),
        index.clone().prop_map(ActionCode::Select),
        index.prop_map(ActionCode::StepSelect),
        Just(ActionCode::ShowMoreResults),
        Just(ActionCode::AskQuestion),
        arb_text().prop_map(ActionCode::Search),
        Just(ActionCode::ShowMoreDetails),
        Just(ActionCode::ChitChat),
        Just(ActionCode::StartTask),
        Just(ActionCode::Stop),
        Just(ActionCode::Pause),
        Just(ActionCode::Cancel),
        Just(ActionCode::Repeat),
        Just(ActionCode::Yes),
        Just(ActionCode::No),
        proptest::option::of(arb_text()).prop_map(ActionCode::SetTimer),
        Just(ActionCode::ConfusedUser),
        Just(ActionCode::ShowRequirements),
        Just(ActionCode::InformCapabilities),
    ]
}

pub fn check_action_roundtrip(cases: u32) -> Result<String, String> {
    let started = Instant::now();
    let kinds = RefCell::new(BTreeSet::new());
    runner(cases)
        .run(&arb_action(), |code| {
            let rendered = code.render().map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(parse_action(&rendered), code.clone(), "rendered as {}", rendered);
            kinds
                .borrow_mut()
                .insert(code.kind().expect("generated codes are known"));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let covered = kinds.into_inner();
    let missing: Vec<_> = ActionKind::ALL.iter().filter(|k| !covered.contains(k)).collect();
    if !missing.is_empty() {
        return Err(format!("kinds never generated: {missing:?}"));
    }
    if elapsed > Duration::from_secs(5) {
        return Err(format!("took {elapsed:?}, budget 5s"));
    }
    Ok(format!("{cases} codes, {} kinds, {elapsed:.2?}", covered.len()))
}

// --------------------------------------------------------------- decisions

pub fn fuzz_utterances() -> Vec<String> {
    fs::read_to_string(fixtures().join("ndp/fuzz_utterances.txt"))
        .expect("fuzz corpus")
        .lines()
        .map(str::to_string)
        .collect()
}

/// Every phase × active-task flag × visible-result count.
pub fn all_scope_keys() -> Vec<(SessionPhase, bool, usize)> {
    let mut keys = Vec::new();
    for phase in SessionPhase::ALL {
        for task in [false, true] {
            for visible in 0..=RESULTS_PAGE_SIZE {
                keys.push((phase, task, visible));
            }
        }
    }
    keys
}

/// One line per decision; fails on the first out-of-scope known code.
pub fn decision_sweep(utterances: &[String]) -> Result<String, String> {
    let mut out = String::new();
    for (phase, task, visible) in all_scope_keys() {
        let scope = scope_for(phase, task, visible);
        for utterance in utterances {
            let summary = if task { "Task, step 1 of 3" } else { "" };
            let ctx = DecisionContext::new(utterance.as_str(), "", scope.clone(), summary);
            let code = decide_pattern(&ctx);
            if !code.is_unknown() && !scope.contains(&code) {
                return Err(format!(
                    "{utterance:?} in {phase:?}/{task}/{visible} gave out-of-scope {code}"
                ));
            }
            out.push_str(&code.log_string());
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn check_decision_safety() -> Result<String, String> {
    let utterances = fuzz_utterances();
    if utterances.len() != 500 {
        return Err(format!("fuzz corpus has {} utterances", utterances.len()));
    }
    let first = decision_sweep(&utterances)?;
    let second = decision_sweep(&utterances)?;
    if first != second {
        return Err("repeated sweeps differ".into());
    }
    let file = fs::File::open(fixtures().join("ndp/dataset.jsonl")).map_err(|e| e.to_string())?;
    let report = evaluate_lines(BufReader::new(file), &PatternBackend);
    if report.skipped != 0 || report.total != PINNED_TOTAL || report.exact_match != PINNED_EXACT_MATCH {
        return Err(format!(
            "dataset: {}/{} exact, {} skipped; pinned {PINNED_EXACT_MATCH}/{PINNED_TOTAL}",
            report.exact_match, report.total, report.skipped
        ));
    }
    Ok(format!(
        "{} decisions in scope, sweeps identical, dataset {}/{}",
        first.lines().count(),
        report.exact_match,
        report.total
    ))
}

// ------------------------------------------------------------------ golden

pub fn golden_catalog() -> Catalog {
    Catalog::load(&fixtures().join("corpus")).expect("fixture corpus")
}

pub fn golden_gateway() -> Gateway {
    Gateway::mock(MockBackend::load_canned(&fixtures().join("mock/canned.jsonl")).expect("canned responses"))
}

pub fn golden_engine(store: Arc<dyn TurnStore>) -> Engine {
    Engine::new(
        Arc::new(golden_catalog()),
        Arc::new(golden_gateway()),
        Arc::new(PatternBackend),
        store,
    )
    .with_clock(Arc::new(ManualClock::new(GOLDEN_CLOCK_MS)))
}

pub fn golden_script() -> Vec<String> {
    fs::read_to_string(fixtures().join("golden/script.txt"))
        .expect("golden script")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

pub fn golden_lines() -> Vec<String> {
    fs::read_to_string(fixtures().join("golden/session.jsonl"))
        .expect("golden transcript")
        .lines()
        .map(str::to_string)
        .collect()
}

/// Stored log lines without their terminators.
pub fn stored_lines(store: &MemoryStore, session_id: &str) -> Vec<String> {
    store
        .lines(session_id)
        .into_iter()
        .map(|l| l.trim_end_matches('\n').to_string())
        .collect()
}

/// Index of the first differing line, if any.
pub fn first_difference(got: &[String], want: &[String]) -> Option<usize> {
    (0..got.len().max(want.len())).find(|&i| got.get(i) != want.get(i))
}

pub fn check_golden_replay() -> Result<String, String> {
    let store = Arc::new(MemoryStore::new());
    let engine = golden_engine(store.clone());
    let mut session = engine.create_session(GOLDEN_SESSION).map_err(|e| e.to_string())?;
    let script = golden_script();
    for utterance in &script {
        engine.handle_turn(&mut session, utterance);
    }
    let got = stored_lines(&store, GOLDEN_SESSION);
    let want = golden_lines();
    if want.len() != 12 || script.len() != 12 {
        return Err(format!(
            "golden has {} lines for {} utterances",
            want.len(),
            script.len()
        ));
    }
    match first_difference(&got, &want) {
        None => Ok(format!("{} turns byte-identical", got.len())),
        Some(i) => Err(format!(
            "turn {} differs\n  got:  {}\n  want: {}",
            i + 1,
            got.get(i).map_or("<missing>", String::as_str),
            want.get(i).map_or("<missing>", String::as_str)
        )),
    }
}

// --------------------------------------------------------------- mutations

#[derive(Clone, Debug)]
pub enum Mutation {
    Append { after: Option<usize> },
    Remove { index: usize },
    Reschedule { from: usize, to: usize },
}

pub fn graph_with_steps(n: usize) -> TaskGraph {
    TaskGraph {
        id: "t".into(),
        title: "Task".into(),
        domain: TaskDomain::Other,
        source_url: "file:t".into(),
        author: None,
        tags: vec![],
        rating: None,
        total_duration_seconds: None,
        requirements: vec![],
        steps: (1..=n)
            .map(|i| StepNode::new(format!("s{i}"), format!("Step {i}.")))
            .collect(),
        knowledge: vec![],
        hero_image: None,
    }
}

/// Indices reach past the largest graph so invalid calls are exercised.
pub fn arb_mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        proptest::option::of(0usize..12).prop_map(|after| Mutation::Append { after }),
        (0usize..12).prop_map(|index| Mutation::Remove { index }),
        (0usize..12, 0usize..12).prop_map(|(from, to)| Mutation::Reschedule { from, to }),
    ]
}

pub fn arb_mutation_case() -> impl Strategy<Value = (usize, usize, Vec<Mutation>)> {
    (1usize..=10).prop_flat_map(|n| (Just(n), 0..n, proptest::collection::vec(arb_mutation(), 0..=50)))
}

/// Applies one mutation to the graph and to a plain id-list model, and
/// checks they agree.
fn step_mutation(
    graph: &mut TaskGraph,
    cursor: &mut TaskCursor,
    model: &mut Vec<String>,
    mutation: &Mutation,
) -> Result<(), String> {
    let len = model.len();
    match *mutation {
        Mutation::Append { after } => {
            let id = graph.fresh_step_id();
            let result = append_step(graph, after, StepNode::new(id.clone(), "Added."));
            let valid = after.is_none_or(|a| a < len);
            match (result, valid) {
                (Ok(next), true) => {
                    model.insert(after.map_or(0, |a| a + 1), id);
                    *graph = next;
                }
                (Err(_), false) => {}
                (r, _) => return Err(format!("append {after:?} on {len} steps: {r:?}")),
            }
        }
        Mutation::Remove { index } => {
            let result = remove_step(graph, index, Some(cursor));
            let valid = index < len && len >= 2;
            match (result, valid) {
                (Ok((next, Some(c))), true) => {
                    model.remove(index);
                    let expected = if cursor.index > index {
                        cursor.index - 1
                    } else {
                        cursor.index.min(model.len() - 1)
                    };
                    if c.index != expected {
                        return Err(format!("remove {index}: cursor {} want {expected}", c.index));
                    }
                    *graph = next;
                    *cursor = c;
                }
                (Err(_), false) => {}
                (r, _) => return Err(format!("remove {index} on {len} steps: {r:?}")),
            }
        }
        Mutation::Reschedule { from, to } => {
            let result = reschedule_step(graph, from, to, Some(cursor));
            let valid = from < len && to < len;
            match (result, valid) {
                (Ok((next, Some(c))), true) => {
                    let followed = model[cursor.index].clone();
                    let step = model.remove(from);
                    model.insert(to, step);
                    let expected = model.iter().position(|id| *id == followed).unwrap();
                    if c.index != expected {
                        return Err(format!("reschedule {from}->{to}: cursor {} want {expected}", c.index));
                    }
                    *graph = next;
                    *cursor = c;
                }
                (Err(_), false) => {}
                (r, _) => return Err(format!("reschedule {from}->{to} on {len} steps: {r:?}")),
            }
        }
    }
    let ids: Vec<&str> = graph.steps.iter().map(|s| s.id.as_str()).collect();
    if ids != model.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("steps {ids:?} but model {model:?}"));
    }
    if ids.iter().collect::<HashSet<_>>().len() != ids.len() {
        return Err(format!("duplicate ids in {ids:?}"));
    }
    if cursor.index >= graph.steps.len() {
        return Err(format!(
            "cursor {} out of range for {} steps",
            cursor.index,
            graph.steps.len()
        ));
    }
    graph.validate().map_err(|e| e.to_string())
}

pub fn run_mutations(n: usize, cursor_at: usize, mutations: &[Mutation]) -> Result<(), String> {
    let mut graph = graph_with_steps(n);
    let mut cursor = TaskCursor {
        task_id: graph.id.clone(),
        index: cursor_at,
    };
    let mut model: Vec<String> = graph.steps.iter().map(|s| s.id.clone()).collect();
    for (i, m) in mutations.iter().enumerate() {
        step_mutation(&mut graph, &mut cursor, &mut model, m).map_err(|e| format!("mutation {i}: {e}"))?;
    }
    Ok(())
}

pub fn check_mutation_safety(cases: u32) -> Result<String, String> {
    let total = RefCell::new(0usize);
    runner(cases)
        .run(&arb_mutation_case(), |(n, cursor, mutations)| {
            *total.borrow_mut() += mutations.len();
            run_mutations(n, cursor, &mutations).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} sequences, {} mutations", total.into_inner()))
}

// --------------------------------------------------------------- retrieval

const VOCAB: [&str; 24] = [
    "lasagna", "vegan", "bread", "door", "hinge", "paint", "room", "oven", "sauce", "butter", "quick", "easy", "soup",
    "fix", "squeaky", "crème", "brûlée", "the", "and", "of", "a", "bake", "wall", "cake",
];

fn arb_words(min: usize, max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(&VOCAB[..]), min..=max).prop_map(|w| w.join(" "))
}

/// Documents with ids whose string order differs from insertion order.
pub fn arb_corpus() -> impl Strategy<Value = Vec<SearchDoc>> {
    proptest::collection::vec((arb_words(0, 4), arb_words(0, 40)), 0..=50).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, (title, body))| SearchDoc::new(format!("d{}", (i * 7) % 53), title, body))
            .collect()
    })
}

pub fn arb_query() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => arb_words(1, 5),
        1 => "[a-z]{1,8}( [a-z]{1,8}){0,3}",
    ]
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Full-scan BM25 straight from document text.
pub struct BruteForce {
    counted: Vec<(String, BTreeMap<String, u32>)>,
    lengths: Vec<u32>,
    total: u32,
}

impl BruteForce {
    pub fn new(docs: &[SearchDoc]) -> Self {
        let counted: Vec<(String, BTreeMap<String, u32>)> = docs
            .iter()
            .map(|d| {
                let mut counts = BTreeMap::new();
                for t in tokenize(&d.title) {
                    *counts.entry(t).or_insert(0) += 2;
                }
                for t in tokenize(&d.body) {
                    *counts.entry(t).or_insert(0) += 1;
                }
                (d.id.clone(), counts)
            })
            .collect();
        let lengths: Vec<u32> = counted.iter().map(|(_, c)| c.values().sum::<u32>()).collect();
        let total = lengths.iter().sum();
        Self {
            counted,
            lengths,
            total,
        }
    }

    /// `(id, score, key)`, best first. `score` uses the float formula for
    /// the tolerance check; `key` keeps exact ties exact (the tf factor as a
    /// reduced fraction and an order-independent sum) and drives the order.
    pub fn rank(&self, query: &str) -> Vec<(String, f64, f64)> {
        let n = self.counted.len();
        let avg = if n == 0 { 0.0 } else { f64::from(self.total) / n as f64 };
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let dfs: BTreeMap<&str, usize> = terms
            .iter()
            .map(|t| {
                (
                    t.as_str(),
                    self.counted.iter().filter(|(_, c)| c.contains_key(t)).count(),
                )
            })
            .collect();
        let mut scored = Vec::new();
        for ((id, counts), &dl) in self.counted.iter().zip(&self.lengths) {
            let mut floats = Vec::new();
            let mut exact = Vec::new();
            for term in &terms {
                let Some(&tf) = counts.get(term) else { continue };
                let df = dfs[term.as_str()] as f64;
                let idf = (1.0 + (n as f64 - df + 0.5) / (df + 0.5)).ln();
                let tff = f64::from(tf);
                floats.push(
                    idf * tff * (BM25_K1 + 1.0) / (tff + BM25_K1 * (1.0 - BM25_B + BM25_B * f64::from(dl) / avg)),
                );
                // k1 = 6/5, b = 3/4, scaled by 10 * total
                let (t, l, s) = (u128::from(tf), u128::from(dl), u128::from(self.total));
                let (num, den) = (22 * t * s, 10 * t * s + 3 * s + 9 * l * n as u128);
                let g = gcd(num, den);
                exact.push(idf * ((num / g) as f64 / (den / g) as f64));
            }
            floats.sort_by(f64::total_cmp);
            exact.sort_by(f64::total_cmp);
            let score: f64 = floats.into_iter().sum();
            let key: f64 = exact.into_iter().sum();
            if key > 0.0 {
                scored.push((id.clone(), score, key));
            }
        }
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

pub fn compare_rankings(index: &InvertedIndex, oracle: &BruteForce, query: &str) -> Result<(), String> {
    let got = index.search(query, index.doc_count.max(1));
    let want = oracle.rank(query);
    let got_ids: Vec<&str> = got.iter().map(|h| h.doc_id.as_str()).collect();
    let want_ids: Vec<&str> = want.iter().map(|(id, ..)| id.as_str()).collect();
    if got_ids != want_ids {
        return Err(format!("{query:?}: index {got_ids:?} vs scan {want_ids:?}"));
    }
    for (hit, (_, score, _)) in got.iter().zip(&want) {
        if (hit.score - score).abs() > 1e-9 {
            return Err(format!("{query:?}: {} scored {} vs {}", hit.doc_id, hit.score, score));
        }
    }
    Ok(())
}

pub fn check_retrieval_oracle(corpora: u32, queries: usize) -> Result<String, String> {
    let strategy = (arb_corpus(), proptest::collection::vec(arb_query(), queries));
    runner(corpora)
        .run(&strategy, |(docs, queries)| {
            let index = InvertedIndex::from_documents(docs.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let oracle = BruteForce::new(&docs);
            for q in &queries {
                compare_rankings(&index, &oracle, q).map_err(TestCaseError::fail)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{corpora} corpora x {queries} queries identical"))
}

// ----------------------------------------------------------------- latency

pub fn percentile(sorted: &[Duration], p: f64) -> Duration {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Runs the golden script over and over in fresh sessions.
pub fn check_latency(turns: usize) -> Result<String, String> {
    let engine = golden_engine(Arc::new(MemoryStore::new()));
    let script = golden_script();
    let mut samples = Vec::with_capacity(turns);
    let mut session_no = 0;
    while samples.len() < turns {
        let mut session = engine
            .create_session(&format!("latency-{session_no}"))
            .map_err(|e| e.to_string())?;
        session_no += 1;
        for utterance in script.iter().take(turns - samples.len()) {
            let started = Instant::now();
            engine.handle_turn(&mut session, utterance);
            samples.push(started.elapsed());
        }
    }
    samples.sort();
    let p50 = percentile(&samples, 0.50);
    let p95 = percentile(&samples, 0.95);
    let max = samples[samples.len() - 1];
    let detail = format!("{turns} turns, p50 {p50:.2?}, p95 {p95:.2?}, max {max:.2?}");
    if p95 < Duration::from_millis(50) {
        Ok(detail)
    } else {
        Err(detail)
    }
}
