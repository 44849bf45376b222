mod common;

use std::fs::File;
use std::io::BufReader;

use taskbot_core::decision::{evaluate_lines, PatternBackend};

#[test]
fn fuzz_corpus_stays_in_scope_and_is_deterministic() {
    let detail = common::check_decision_safety().unwrap_or_else(|e| panic!("{e}"));
    println!("{detail}");
}

#[test]
fn pinned_accuracy_on_dataset() {
    let file = File::open(common::fixtures().join("ndp/dataset.jsonl")).unwrap();
    let report = evaluate_lines(BufReader::new(file), &PatternBackend);
    assert_eq!(report.total, common::PINNED_TOTAL);
    assert_eq!(report.skipped, 0);
    assert_eq!(report.exact_match, common::PINNED_EXACT_MATCH);
}

#[test]
fn sweep_output_is_identical_across_runs() {
    let utterances = common::fuzz_utterances();
    let a = common::decision_sweep(&utterances[..50]).unwrap();
    let b = common::decision_sweep(&utterances[..50]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 50 * common::all_scope_keys().len());
}
