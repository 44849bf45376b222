//! The action-code language.
//!
//! Every module talks to every other module in action codes: the decision
//! backends emit them, the orchestrator dispatches on them and the turn log
//! records them. The grammar is closed; anything outside it parses to
//! [`ActionCode::Unknown`], which is the route to the fallback policy.

use std::collections::BTreeSet;
use std::fmt;
use std::num::NonZeroU32;

use serde::{Deserialize, Serialize};

/// Conversation phase. Scoping and phase transitions key off this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Greeting,
    Search,
    Results,
    TaskPreview,
    Execution,
    Farewell,
}

impl SessionPhase {
    pub const ALL: [SessionPhase; 6] = [
        SessionPhase::Greeting,
        SessionPhase::Search,
        SessionPhase::Results,
        SessionPhase::TaskPreview,
        SessionPhase::Execution,
        SessionPhase::Farewell,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SessionPhase::Greeting => "greeting",
            SessionPhase::Search => "search",
            SessionPhase::Results => "results",
            SessionPhase::TaskPreview => "task_preview",
            SessionPhase::Execution => "execution",
            SessionPhase::Farewell => "farewell",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == name)
    }
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trimmed, non-empty argument string (search queries, timer specs).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionText(String);

impl ActionText {
    pub fn new(text: impl AsRef<str>) -> Option<Self> {
        let trimmed = text.as_ref().trim();
        if trimmed.is_empty() {
            None
        } else {
            Some(Self(trimmed.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActionText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The four action families of the action space, plus the unknown sink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionCategory {
    TaskNavigation,
    Conversational,
    GeneralNavigation,
    DomainSpecific,
    Unknown,
}

impl ActionCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionCategory::TaskNavigation => "task_navigation",
            ActionCategory::Conversational => "conversational",
            ActionCategory::GeneralNavigation => "general_navigation",
            ActionCategory::DomainSpecific => "domain_specific",
            ActionCategory::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ActionCode {
    // task navigation
    Restart,
    Next,
    Previous,
    /// 1-based index into the visible results page.
    Select(NonZeroU32),
    /// 1-based step number inside the active task.
    StepSelect(NonZeroU32),
    ShowMoreResults,
    // conversational
    AskQuestion,
    Search(ActionText),
    ShowMoreDetails,
    ChitChat,
    // general navigation
    StartTask,
    Stop,
    Pause,
    Cancel,
    Repeat,
    Yes,
    No,
    // domain specific
    SetTimer(Option<ActionText>),
    ConfusedUser,
    ShowRequirements,
    InformCapabilities,
    /// Anything outside the grammar, carrying the raw text.
    Unknown(String),
}

/// An action template: a variant name with its arity, without arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Restart,
    Next,
    Previous,
    Select,
    StepSelect,
    ShowMoreResults,
    AskQuestion,
    Search,
    ShowMoreDetails,
    ChitChat,
    StartTask,
    Stop,
    Pause,
    Cancel,
    Repeat,
    Yes,
    No,
    SetTimer,
    ConfusedUser,
    ShowRequirements,
    InformCapabilities,
}

impl ActionKind {
    pub const ALL: [ActionKind; 21] = [
        ActionKind::Restart,
        ActionKind::Next,
        ActionKind::Previous,
        ActionKind::Select,
        ActionKind::StepSelect,
        ActionKind::ShowMoreResults,
        ActionKind::AskQuestion,
        ActionKind::Search,
        ActionKind::ShowMoreDetails,
        ActionKind::ChitChat,
        ActionKind::StartTask,
        ActionKind::Stop,
        ActionKind::Pause,
        ActionKind::Cancel,
        ActionKind::Repeat,
        ActionKind::Yes,
        ActionKind::No,
        ActionKind::SetTimer,
        ActionKind::ConfusedUser,
        ActionKind::ShowRequirements,
        ActionKind::InformCapabilities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Restart => "restart",
            ActionKind::Next => "next",
            ActionKind::Previous => "previous",
            ActionKind::Select => "select",
            ActionKind::StepSelect => "step_select",
            ActionKind::ShowMoreResults => "show_more_results",
            ActionKind::AskQuestion => "ask_question",
            ActionKind::Search => "search",
            ActionKind::ShowMoreDetails => "show_more_details",
            ActionKind::ChitChat => "chit_chat",
            ActionKind::StartTask => "start_task",
            ActionKind::Stop => "stop",
            ActionKind::Pause => "pause",
            ActionKind::Cancel => "cancel",
            ActionKind::Repeat => "repeat",
            ActionKind::Yes => "yes",
            ActionKind::No => "no",
            ActionKind::SetTimer => "set_timer",
            ActionKind::ConfusedUser => "confused_user",
            ActionKind::ShowRequirements => "show_requirements",
            ActionKind::InformCapabilities => "inform_capabilities",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Signature as shown to a generative decision backend.
    pub fn signature(self) -> &'static str {
        match self {
            ActionKind::Select => "select(int)",
            ActionKind::StepSelect => "step_select(int)",
            ActionKind::Search => "search(query: string)",
            ActionKind::SetTimer => "set_timer(spec: optional string)",
            other => other.name(),
        }
    }

    pub fn category(self) -> ActionCategory {
        use ActionKind::*;
        match self {
            Restart | Next | Previous | Select | StepSelect | ShowMoreResults => ActionCategory::TaskNavigation,
            AskQuestion | Search | ShowMoreDetails | ChitChat => ActionCategory::Conversational,
            StartTask | Stop | Pause | Cancel | Repeat | Yes | No => ActionCategory::GeneralNavigation,
            SetTimer | ConfusedUser | ShowRequirements | InformCapabilities => ActionCategory::DomainSpecific,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("unknown action codes have no canonical form: {0:?}")]
    RenderUnknown(String),
}

impl ActionCode {
    pub fn kind(&self) -> Option<ActionKind> {
        Some(match self {
            ActionCode::Restart => ActionKind::Restart,
            ActionCode::Next => ActionKind::Next,
            ActionCode::Previous => ActionKind::Previous,
            ActionCode::Select(_) => ActionKind::Select,
            ActionCode::StepSelect(_) => ActionKind::StepSelect,
            ActionCode::ShowMoreResults => ActionKind::ShowMoreResults,
            ActionCode::AskQuestion => ActionKind::AskQuestion,
            ActionCode::Search(_) => ActionKind::Search,
            ActionCode::ShowMoreDetails => ActionKind::ShowMoreDetails,
            ActionCode::ChitChat => ActionKind::ChitChat,
            ActionCode::StartTask => ActionKind::StartTask,
            ActionCode::Stop => ActionKind::Stop,
            ActionCode::Pause => ActionKind::Pause,
            ActionCode::Cancel => ActionKind::Cancel,
            ActionCode::Repeat => ActionKind::Repeat,
            ActionCode::Yes => ActionKind::Yes,
            ActionCode::No => ActionKind::No,
            ActionCode::SetTimer(_) => ActionKind::SetTimer,
            ActionCode::ConfusedUser => ActionKind::ConfusedUser,
            ActionCode::ShowRequirements => ActionKind::ShowRequirements,
            ActionCode::InformCapabilities => ActionKind::InformCapabilities,
            ActionCode::Unknown(_) => return None,
        })
    }

    pub fn category(&self) -> ActionCategory {
        self.kind().map(ActionKind::category).unwrap_or(ActionCategory::Unknown)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, ActionCode::Unknown(_))
    }

    pub fn search(query: impl AsRef<str>) -> Option<Self> {
        ActionText::new(query).map(ActionCode::Search)
    }

    pub fn select(index: u32) -> Option<Self> {
        NonZeroU32::new(index).map(ActionCode::Select)
    }

    pub fn step_select(index: u32) -> Option<Self> {
        NonZeroU32::new(index).map(ActionCode::StepSelect)
    }

    /// Canonical lowercase form. Unknown has none.
    pub fn render(&self) -> Result<String, ActionError> {
        let rendered = match self {
            ActionCode::Unknown(raw) => return Err(ActionError::RenderUnknown(raw.clone())),
            ActionCode::Select(n) => format!("select({n})"),
            ActionCode::StepSelect(n) => format!("step_select({n})"),
            ActionCode::Search(q) => format!("search(query: {})", quote(q.as_str())),
            ActionCode::SetTimer(Some(spec)) => format!("set_timer(spec: {})", quote(spec.as_str())),
            other => other.kind().map(ActionKind::name).unwrap_or_default().to_string(),
        };
        Ok(rendered)
    }

    /// String recorded in turn logs: the canonical form, or `unknown(raw: "...")`.
    pub fn log_string(&self) -> String {
        match self {
            ActionCode::Unknown(raw) => format!("unknown(raw: {})", quote(raw)),
            other => other.render().unwrap_or_default(),
        }
    }
}

impl fmt::Display for ActionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.log_string())
    }
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Parses an action-code string. Total: anything outside the grammar
/// becomes `Unknown` carrying the input verbatim.
pub fn parse_action(text: &str) -> ActionCode {
    parse_known(text).unwrap_or_else(|| ActionCode::Unknown(text.to_string()))
}

pub fn render_action(action: &ActionCode) -> Result<String, ActionError> {
    action.render()
}

fn parse_known(text: &str) -> Option<ActionCode> {
    let s = text.trim();
    let name_end = s
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_alphabetic() || *c == '_'))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    if name_end == 0 {
        return None;
    }
    let name = s[..name_end].to_ascii_lowercase();
    let kind = ActionKind::from_name(&name)?;
    let rest = s[name_end..].trim_start();
    let args = if rest.is_empty() {
        None
    } else {
        let inner = rest.strip_prefix('(')?.strip_suffix(')')?.trim();
        if inner.is_empty() {
            None
        } else {
            Some(inner)
        }
    };

    use ActionKind as K;
    match kind {
        K::Select | K::StepSelect => {
            let raw = strip_label(args?, &["index", "n", "number", "step"])?;
            if !raw.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let n = NonZeroU32::new(raw.parse::<u32>().ok()?)?;
            Some(if kind == K::Select {
                ActionCode::Select(n)
            } else {
                ActionCode::StepSelect(n)
            })
        }
        K::Search => {
            let raw = strip_label(args?, &["query", "q"])?;
            ActionText::new(string_arg(raw)?).map(ActionCode::Search)
        }
        K::SetTimer => match args {
            None => Some(ActionCode::SetTimer(None)),
            Some(args) => {
                let raw = strip_label(args, &["spec", "duration", "time"])?;
                Some(ActionCode::SetTimer(ActionText::new(string_arg(raw)?)))
            }
        },
        nullary => {
            if args.is_some() {
                return None;
            }
            Some(nullary_code(nullary))
        }
    }
}

fn nullary_code(kind: ActionKind) -> ActionCode {
    use ActionKind as K;
    match kind {
        K::Restart => ActionCode::Restart,
        K::Next => ActionCode::Next,
        K::Previous => ActionCode::Previous,
        K::ShowMoreResults => ActionCode::ShowMoreResults,
        K::AskQuestion => ActionCode::AskQuestion,
        K::ShowMoreDetails => ActionCode::ShowMoreDetails,
        K::ChitChat => ActionCode::ChitChat,
        K::StartTask => ActionCode::StartTask,
        K::Stop => ActionCode::Stop,
        K::Pause => ActionCode::Pause,
        K::Cancel => ActionCode::Cancel,
        K::Repeat => ActionCode::Repeat,
        K::Yes => ActionCode::Yes,
        K::No => ActionCode::No,
        K::ConfusedUser => ActionCode::ConfusedUser,
        K::ShowRequirements => ActionCode::ShowRequirements,
        K::InformCapabilities => ActionCode::InformCapabilities,
        K::Select | K::StepSelect | K::Search | K::SetTimer => {
            unreachable!("{kind:?} takes an argument")
        }
    }
}

/// Strips an optional `label:` prefix. Unexpected labels reject the code.
fn strip_label<'a>(arg: &'a str, labels: &[&str]) -> Option<&'a str> {
    if arg.starts_with('"') || arg.starts_with('\'') {
        return Some(arg);
    }
    match arg.split_once(':') {
        Some((label, value)) => {
            let label = label.trim().to_ascii_lowercase();
            labels.contains(&label.as_str()).then(|| value.trim())
        }
        None => Some(arg),
    }
}

/// A quoted string with `\` escapes, or a bare word run without quotes or
/// parentheses.
fn string_arg(raw: &str) -> Option<String> {
    let mut chars = raw.chars();
    match chars.next()? {
        q @ ('"' | '\'') => {
            let mut out = String::new();
            let mut escaped = false;
            for (i, c) in raw.char_indices().skip(1) {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    // closing quote must end the argument
                    return raw[i + c.len_utf8()..].trim().is_empty().then_some(out);
                } else {
                    out.push(c);
                }
            }
            None
        }
        _ => {
            if raw.contains(['"', '\'', '(', ')']) {
                None
            } else {
                Some(raw.to_string())
            }
        }
    }
}

/// Flags a scope is derived from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScopeKey {
    pub phase: SessionPhase,
    pub has_active_task: bool,
    pub visible_results: usize,
}

/// The set of action templates valid in a conversation state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionScope {
    allowed: BTreeSet<ActionKind>,
    derived_from: ScopeKey,
}

impl ActionScope {
    pub fn contains(&self, code: &ActionCode) -> bool {
        code.kind().is_some_and(|k| self.allowed.contains(&k))
    }

    pub fn allows(&self, kind: ActionKind) -> bool {
        self.allowed.contains(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = ActionKind> + '_ {
        self.allowed.iter().copied()
    }

    pub fn derived_from(&self) -> ScopeKey {
        self.derived_from
    }

    pub fn is_superset(&self, other: &ActionScope) -> bool {
        self.allowed.is_superset(&other.allowed)
    }

    /// Rendered templates, one per line, in a fixed order.
    pub fn templates(&self) -> Vec<&'static str> {
        self.allowed.iter().map(|k| k.signature()).collect()
    }
}

pub fn scope_for(phase: SessionPhase, has_active_task: bool, visible_results: usize) -> ActionScope {
    use ActionKind as K;
    let mut allowed = BTreeSet::from([
        K::AskQuestion,
        K::ChitChat,
        K::InformCapabilities,
        K::ConfusedUser,
        K::Yes,
        K::No,
        K::Stop,
        K::Cancel,
        K::Repeat,
        K::Pause,
    ]);
    // Fresh searches are not offered while a task is being executed: free
    // text in that phase belongs to the fallback route.
    if phase != SessionPhase::Execution {
        allowed.insert(K::Search);
    }
    if visible_results > 0 {
        allowed.extend([K::Select, K::ShowMoreResults]);
    }
    if has_active_task {
        allowed.extend([
            K::Next,
            K::Previous,
            K::Restart,
            K::StepSelect,
            K::ShowRequirements,
            K::SetTimer,
            K::ShowMoreDetails,
        ]);
    }
    if phase == SessionPhase::TaskPreview {
        allowed.insert(K::StartTask);
    }
    ActionScope {
        allowed,
        derived_from: ScopeKey {
            phase,
            has_active_task,
            visible_results,
        },
    }
}
