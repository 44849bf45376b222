use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{DecisionBackend, DecisionContext};
use crate::action::{parse_action, scope_for, ActionCode, SessionPhase};

/// One line of the evaluation dataset. The scope is rebuilt from the
/// phase and flags rather than stored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub utterance: String,
    #[serde(default)]
    pub previous_system_response: String,
    pub scope_phase: SessionPhase,
    pub has_active_task: bool,
    pub visible_results: usize,
    pub gold_action: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub context: DecisionContext,
    pub gold_action: ActionCode,
}

impl DecisionRecord {
    /// Validates a dataset line: non-empty utterance, parseable gold code,
    /// gold inside the reconstructed scope.
    pub fn from_line(line: &RecordLine) -> Result<Self, String> {
        if line.utterance.trim().is_empty() {
            return Err("empty utterance".into());
        }
        let gold = parse_action(&line.gold_action);
        if gold.is_unknown() {
            return Err(format!("gold_action {:?} does not parse", line.gold_action));
        }
        let scope = scope_for(line.scope_phase, line.has_active_task, line.visible_results);
        if !scope.contains(&gold) {
            return Err(format!("gold_action {:?} is outside the scope", line.gold_action));
        }
        let summary = if line.has_active_task { "active task" } else { "" };
        Ok(Self {
            context: DecisionContext::new(
                line.utterance.clone(),
                line.previous_system_response.clone(),
                scope,
                summary,
            ),
            gold_action: gold,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Counts are keyed by action name (`search`, `select`, ...) rather than
/// the full rendered code, so arguments do not fragment the matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub gold: String,
    pub predicted: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub backend: String,
    pub total: usize,
    pub exact_match: usize,
    pub accuracy: Option<f64>,
    pub per_category: BTreeMap<String, CategoryScore>,
    pub confusion: Vec<ConfusionEntry>,
    pub skipped: usize,
    pub diagnostics: Vec<String>,
}

fn code_name(code: &ActionCode) -> String {
    code.kind().map_or("unknown", |k| k.name()).to_string()
}

pub fn evaluate<'a>(
    records: impl IntoIterator<Item = &'a DecisionRecord>,
    backend: &dyn DecisionBackend,
) -> DecisionReport {
    let mut report = DecisionReport {
        backend: backend.id().to_string(),
        total: 0,
        exact_match: 0,
        accuracy: None,
        per_category: BTreeMap::new(),
        confusion: Vec::new(),
        skipped: 0,
        diagnostics: Vec::new(),
    };
    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    for record in records {
        let predicted = backend.decide(&record.context).code;
        let hit = predicted.log_string() == record.gold_action.log_string();
        report.total += 1;
        report.exact_match += usize::from(hit);
        let cat = report
            .per_category
            .entry(record.gold_action.category().as_str().to_string())
            .or_insert(CategoryScore {
                total: 0,
                correct: 0,
                accuracy: 0.0,
            });
        cat.total += 1;
        cat.correct += usize::from(hit);
        *confusion
            .entry((code_name(&record.gold_action), code_name(&predicted)))
            .or_default() += 1;
    }
    for cat in report.per_category.values_mut() {
        cat.accuracy = cat.correct as f64 / cat.total as f64;
    }
    if report.total > 0 {
        report.accuracy = Some(report.exact_match as f64 / report.total as f64);
    }
    report.confusion = confusion
        .into_iter()
        .map(|((gold, predicted), count)| ConfusionEntry { gold, predicted, count })
        .collect();
    report
}

/// Parses a JSONL dataset and evaluates it. Malformed or invalid lines are
/// skipped with a `line N: reason` diagnostic.
pub fn evaluate_lines(reader: impl BufRead, backend: &dyn DecisionBackend) -> DecisionReport {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = match line {
            Ok(line) => line,
            Err(e) => {
                diagnostics.push(format!("line {n}: {e}"));
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RecordLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(|l| DecisionRecord::from_line(&l));
        match parsed {
            Ok(record) => records.push(record),
            Err(reason) => diagnostics.push(format!("line {n}: {reason}")),
        }
    }
    let mut report = evaluate(&records, backend);
    report.skipped = diagnostics.len();
    report.diagnostics = diagnostics;
    report
}
