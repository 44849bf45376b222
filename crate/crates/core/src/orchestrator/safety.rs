//! Post-processing applied to every outgoing response.

use std::path::Path;

use regex::{Regex, RegexBuilder};

pub const MAX_RESPONSE_CHARS: usize = 1200;
pub const REFUSAL_TEXT: &str =
    "Sorry, I can't help with that. Let's get back to your task, or ask me to find something else.";

const BUILTIN_DENYLIST: &str = include_str!("../../config/denylist.txt");

#[derive(Clone, Debug)]
pub struct SafetyFilter {
    denylist: Option<Regex>,
    max_chars: usize,
    refusal: String,
}

impl Default for SafetyFilter {
    fn default() -> Self {
        Self::from_terms(parse_terms(BUILTIN_DENYLIST))
    }
}

fn parse_terms(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl SafetyFilter {
    pub fn from_terms(terms: impl IntoIterator<Item = String>) -> Self {
        let alternatives: Vec<String> = terms
            .into_iter()
            .map(|t| t.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+"))
            .filter(|t| !t.is_empty())
            .collect();
        let denylist = (!alternatives.is_empty()).then(|| {
            RegexBuilder::new(&format!(r"\b(?:{})\b", alternatives.join("|")))
                .case_insensitive(true)
                .build()
                .expect("escaped terms form a valid pattern")
        });
        Self {
            denylist,
            max_chars: MAX_RESPONSE_CHARS,
            refusal: REFUSAL_TEXT.to_string(),
        }
    }

    /// One term per line; `#` starts a comment line.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_terms(parse_terms(&std::fs::read_to_string(path)?)))
    }

    pub fn refusal(&self) -> &str {
        &self.refusal
    }

    /// Clamp, then denylist, then whitespace normalization.
    pub fn apply(&self, text: &str) -> String {
        let clamped = clamp(text, self.max_chars);
        if self.denylist.as_ref().is_some_and(|re| re.is_match(&clamped)) {
            return self.refusal.clone();
        }
        normalize_whitespace(&clamped)
    }
}

pub fn postprocess_safety(text: &str) -> String {
    SafetyFilter::default().apply(text)
}

/// Cuts to at most `max` chars, ending after the last sentence terminator
/// inside the limit, or at the last word break when there is none.
fn clamp(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let end = text.char_indices().nth(max).map_or(text.len(), |(i, _)| i);
    let head = &text[..end];
    let sentence_end = head
        .char_indices()
        .filter(|&(i, c)| matches!(c, '.' | '!' | '?') && text[i + c.len_utf8()..].starts_with(char::is_whitespace))
        .map(|(i, c)| i + c.len_utf8())
        .next_back();
    let cut = sentence_end.or_else(|| head.rfind(char::is_whitespace)).unwrap_or(end);
    head[..cut].to_string()
}

/// Collapses runs of blanks inside each line, trims lines, and keeps at
/// most one empty line between paragraphs.
fn normalize_whitespace(text: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    for line in text.lines() {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() && lines.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        lines.push(collapsed);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}
