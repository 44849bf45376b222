//! Deterministic rule cascade mapping utterances to action codes.
//!
//! Rules run in a fixed order and the first in-scope match wins. A rule
//! whose code is out of scope falls through to the next rule, so the
//! cascade can never emit a code the scope does not allow.

use std::num::NonZeroU32;
use std::sync::LazyLock;

use regex::Regex;

use super::DecisionContext;
use crate::action::{ActionCode, ActionKind, ActionText};

fn number_word(word: &str) -> Option<u32> {
    let word = word.trim_end_matches('.');
    if let Ok(n) = word.parse::<u32>() {
        return Some(n);
    }
    let n = match word {
        "one" | "first" | "1st" => 1,
        "two" | "second" | "2nd" => 2,
        "three" | "third" | "3rd" => 3,
        "four" | "fourth" | "4th" => 4,
        "five" | "fifth" | "5th" => 5,
        "six" | "sixth" | "6th" => 6,
        "seven" | "seventh" | "7th" => 7,
        "eight" | "eighth" | "8th" => 8,
        "nine" | "ninth" | "9th" => 9,
        "ten" | "tenth" | "10th" => 10,
        _ => return None,
    };
    Some(n)
}

static ORDINAL_SELECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:(?:select|choose|pick|open|show me|give me|i want|i'll take|i will take|let's do|lets do|go with|take)\s+)?(?:the\s+)?(?:(?:number|option|result|recipe|task|no\.?)\s+)?(?P<n>[a-z0-9]+)(?:\s+(?:one|option|result|recipe|task))?(?:\s+please)?$",
    )
    .unwrap()
});

static STEP_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bstep\s+(?:number\s+)?(?P<n>[a-z0-9]+)\b").unwrap());

static ORDINAL_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?P<n>first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|\d+(?:st|nd|rd|th))\s+step\b")
        .unwrap()
});

static TIMER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:^|\b(?:set|start)\s+(?:a\s+|an\s+|the\s+|my\s+)?)timer\b(?:\s+(?:for|of|to)\s+(?P<spec>.+))?")
        .unwrap()
});

static REQUIREMENTS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:show(?: me)?\s+|list\s+)?(?:the\s+|my\s+)?(?:ingredients|ingredient list|requirements|supplies|materials|tools|shopping list)(?:\s+list)?(?:\s+please)?$|\bwhat (?:do|will|would) i need\b|\b(?:what|which) (?:ingredients|tools|supplies|materials)\b",
    )
    .unwrap()
});

const KEYWORDS: [(&str, ActionKind); 10] = [
    ("next", ActionKind::Next),
    ("previous", ActionKind::Previous),
    ("repeat", ActionKind::Repeat),
    ("stop", ActionKind::Stop),
    ("pause", ActionKind::Pause),
    ("cancel", ActionKind::Cancel),
    ("restart", ActionKind::Restart),
    ("yes", ActionKind::Yes),
    ("no", ActionKind::No),
    ("start", ActionKind::StartTask),
];

const CAPABILITY_PHRASES: [&str; 7] = [
    "help",
    "what can you do",
    "what can you help with",
    "what can you help me with",
    "what are your capabilities",
    "what do you do",
    "how does this work",
];

const CONFUSED_PHRASES: [&str; 8] = [
    "i'm confused",
    "i am confused",
    "confused",
    "i don't understand",
    "i do not understand",
    "huh",
    "i'm lost",
    "what",
];

const CHITCHAT_PHRASES: [&str; 12] = [
    "hi",
    "hello",
    "hey",
    "hi there",
    "hello there",
    "good morning",
    "good evening",
    "thanks",
    "thank you",
    "how are you",
    "who are you",
    "cool",
];

const QUESTION_LEADS: [&str; 6] = ["what", "how", "why", "can", "which", "when"];

/// Lowercase, collapse whitespace, drop trailing `.`, `!` and `,`.
fn normalize(utterance: &str) -> String {
    let collapsed = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .to_lowercase()
        .trim_end_matches(['.', '!', ','])
        .trim()
        .to_string()
}

fn nullary(kind: ActionKind) -> ActionCode {
    crate::action::parse_action(kind.name())
}

fn select_match(norm: &str) -> Option<u32> {
    let caps = ORDINAL_SELECT.captures(norm)?;
    number_word(&caps["n"])
}

fn step_match(norm: &str) -> Option<u32> {
    [&*STEP_NUMBER, &*ORDINAL_STEP]
        .iter()
        .find_map(|re| re.captures(norm).and_then(|c| number_word(&c["n"])))
}

/// Runs on the original text so the spec keeps the user's casing.
fn timer_match(utterance: &str) -> Option<Option<ActionText>> {
    let collapsed = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
    let caps = TIMER.captures(&collapsed)?;
    let spec = caps
        .name("spec")
        .map(|m| m.as_str().trim_end_matches(['?', '.', '!', ',']).to_string());
    Some(spec.and_then(ActionText::new))
}

fn is_question(norm: &str) -> bool {
    if norm.ends_with('?') {
        return true;
    }
    let first = norm.split_whitespace().next().unwrap_or("");
    let lead = first.split('\'').next().unwrap_or(first);
    QUESTION_LEADS.contains(&lead)
}

pub fn decide_pattern(ctx: &DecisionContext) -> ActionCode {
    let scope = &ctx.scope;
    let norm = normalize(&ctx.utterance);
    let bare = norm.trim_end_matches('?').trim();
    let allowed = |code: &ActionCode| scope.contains(code);

    // 1. exact navigation keywords
    if let Some((_, kind)) = KEYWORDS.iter().find(|(word, _)| *word == norm) {
        let code = nullary(*kind);
        if allowed(&code) {
            return code;
        }
    }

    // 2. ordinal reference into visible results
    if scope.allows(ActionKind::Select) && !norm.contains("step") {
        if let Some(code) = select_match(bare).and_then(NonZeroU32::new).map(ActionCode::Select) {
            return code;
        }
    }

    // 3. step jumps
    if scope.allows(ActionKind::StepSelect) {
        if let Some(code) = step_match(bare).and_then(NonZeroU32::new).map(ActionCode::StepSelect) {
            return code;
        }
    }

    // 4. timers
    if scope.allows(ActionKind::SetTimer) {
        if let Some(spec) = timer_match(&ctx.utterance) {
            return ActionCode::SetTimer(spec);
        }
    }

    // 5. requirements
    if scope.allows(ActionKind::ShowRequirements) && REQUIREMENTS.is_match(bare) {
        return ActionCode::ShowRequirements;
    }

    // 6. capability, confusion and small-talk phrases
    for (phrases, code) in [
        (&CAPABILITY_PHRASES[..], ActionCode::InformCapabilities),
        (&CONFUSED_PHRASES[..], ActionCode::ConfusedUser),
        (&CHITCHAT_PHRASES[..], ActionCode::ChitChat),
    ] {
        if phrases.contains(&bare) && allowed(&code) {
            return code;
        }
    }

    // 7. questions
    if is_question(&norm) && scope.allows(ActionKind::AskQuestion) {
        return ActionCode::AskQuestion;
    }

    // 8. paging and details
    if (norm.contains("more results") || norm.contains("more options")) && scope.allows(ActionKind::ShowMoreResults) {
        return ActionCode::ShowMoreResults;
    }
    if (norm.contains("more details") || norm.contains("tell me more")) && scope.allows(ActionKind::ShowMoreDetails) {
        return ActionCode::ShowMoreDetails;
    }

    // 9. free text is a search when searching is allowed
    if scope.allows(ActionKind::Search) {
        if let Some(code) = ActionCode::search(&ctx.utterance) {
            return code;
        }
    }
    ActionCode::Unknown(ctx.utterance.clone())
}
