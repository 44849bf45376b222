//! One conversation turn end to end: decide, validate against the scope,
//! run a policy, post-process and record.

mod catalog;
mod clock;
mod policy;
mod safety;
mod store;
mod timer;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use catalog::{read_knowledge, Catalog, CatalogError, INDEX_FILE, KNOWLEDGE_FILE, TASKS_FILE, TRAJECTORIES_FILE};
pub use clock::{Clock, ManualClock, SystemClock};
pub use policy::{substitution_target, CAPABILITIES_TEXT, RESULTS_PAGE_SIZE};
pub use safety::{postprocess_safety, SafetyFilter, MAX_RESPONSE_CHARS, REFUSAL_TEXT};
pub use store::{encode_record, read_log, JsonlStore, MemoryStore, StoreError, TurnStore};
pub use timer::{format_duration, parse_duration};

use crate::action::{scope_for, ActionCode, ActionScope, SessionPhase};
use crate::decision::{DecisionBackend, DecisionContext};
use crate::gateway::Gateway;
use crate::taskgraph::{MediaRef, Requirement, TaskCursor, TaskGraph};

pub const MAX_OPTIONS: usize = 6;
pub const MAX_UTTERANCE_CHARS: usize = 2000;

/// 1-based step number and step count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPosition {
    pub index: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenPayload {
    #[serde(default)]
    pub headline: Option<String>,
    pub body_text: String,
    #[serde(default)]
    pub images: Vec<MediaRef>,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub step_position: Option<StepPosition>,
    #[serde(default)]
    pub requirements_view: Option<Vec<Requirement>>,
}

impl ScreenPayload {
    pub fn text(body: impl Into<String>) -> Self {
        Self {
            body_text: body.into(),
            ..Self::default()
        }
    }

    pub fn with_headline(mut self, headline: impl Into<String>) -> Self {
        self.headline = Some(headline.into());
        self
    }

    pub fn with_options<S: Into<String>>(mut self, options: impl IntoIterator<Item = S>) -> Self {
        self.options = options.into_iter().map(Into::into).take(MAX_OPTIONS).collect();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultList {
    pub query: String,
    pub task_ids: Vec<String>,
    pub offset: usize,
}

impl ResultList {
    pub fn visible(&self) -> &[String] {
        let start = self.offset.min(self.task_ids.len());
        let end = (start + RESULTS_PAGE_SIZE).min(self.task_ids.len());
        &self.task_ids[start..end]
    }

    pub fn has_more(&self) -> bool {
        self.offset + RESULTS_PAGE_SIZE < self.task_ids.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub label: String,
    pub duration_seconds: u64,
    pub created_at: u64,
}

/// The mutable part of a session, snapshotted into every log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: SessionPhase,
    pub cursor: Option<TaskCursor>,
    pub active_task: Option<TaskGraph>,
    pub results: ResultList,
    pub timers: Vec<Timer>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            phase: SessionPhase::Greeting,
            cursor: None,
            active_task: None,
            results: ResultList::default(),
            timers: Vec::new(),
        }
    }
}

impl SessionState {
    pub fn visible_results(&self) -> usize {
        match self.phase {
            SessionPhase::Results | SessionPhase::TaskPreview => self.results.visible().len(),
            _ => 0,
        }
    }

    pub fn scope(&self) -> ActionScope {
        scope_for(self.phase, self.active_task.is_some(), self.visible_results())
    }

    pub fn task_summary(&self) -> String {
        match (&self.active_task, &self.cursor) {
            (Some(task), Some(cursor)) if self.phase == SessionPhase::Execution => {
                format!("{}, step {} of {}", task.title, cursor.index + 1, task.steps.len())
            }
            (Some(task), _) => format!("{}, not started", task.title),
            _ => String::new(),
        }
    }

    pub(crate) fn clear_task(&mut self) {
        self.active_task = None;
        self.cursor = None;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub user_utterance: String,
    pub action_code: String,
    pub policy: String,
    pub system_response: String,
    pub screen: ScreenPayload,
    pub timestamp: u64,
    pub gateway_calls: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

/// One log line: the turn plus the session state after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    #[serde(flatten)]
    pub turn: Turn,
    pub state: SessionState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    #[serde(flatten)]
    pub state: SessionState,
    pub history: Vec<Turn>,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            state: SessionState::default(),
            history: Vec::new(),
        }
    }

    /// Rebuilds a session from its log: history from every line, state
    /// from the last one.
    pub fn restore(session_id: impl Into<String>, records: Vec<TurnRecord>) -> Self {
        let mut session = Self::new(session_id);
        for record in records {
            session.state = record.state;
            session.history.push(record.turn);
        }
        session
    }

    pub fn phase(&self) -> SessionPhase {
        self.state.phase
    }

    pub fn previous_response(&self) -> &str {
        self.history.last().map_or("", |t| t.system_response.as_str())
    }
}

/// What a caller gets back from a turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnOutput {
    pub response_text: String,
    pub screen: ScreenPayload,
    pub action_code: String,
    pub policy: String,
    pub latency_ms: u64,
    /// False for empty utterances, which are answered but not recorded.
    pub accepted: bool,
    pub persist_error: Option<String>,
}

/// Shared, read-mostly dependencies for handling turns.
pub struct Engine {
    catalog: Arc<Catalog>,
    gateway: Arc<Gateway>,
    decider: Arc<dyn DecisionBackend>,
    store: Arc<dyn TurnStore>,
    clock: Arc<dyn Clock>,
    safety: SafetyFilter,
}

impl Engine {
    pub fn new(
        catalog: Arc<Catalog>,
        gateway: Arc<Gateway>,
        decider: Arc<dyn DecisionBackend>,
        store: Arc<dyn TurnStore>,
    ) -> Self {
        Self {
            catalog,
            gateway,
            decider,
            store,
            clock: Arc::new(SystemClock),
            safety: SafetyFilter::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_safety(mut self, safety: SafetyFilter) -> Self {
        self.safety = safety;
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn store(&self) -> &dyn TurnStore {
        self.store.as_ref()
    }

    pub fn decider_id(&self) -> &str {
        self.decider.id()
    }

    pub fn create_session(&self, session_id: &str) -> Result<Session, StoreError> {
        self.store.create(session_id)?;
        Ok(Session::new(session_id))
    }

    pub fn restore_session(&self, session_id: &str) -> Result<Option<Session>, StoreError> {
        Ok(self
            .store
            .load(session_id)?
            .map(|records| Session::restore(session_id, records)))
    }

    pub fn handle_turn(&self, session: &mut Session, utterance: &str) -> TurnOutput {
        let started = Instant::now();
        let utterance = utterance.trim();
        if utterance.is_empty() {
            let screen = policy::reprompt(&session.state, &self.catalog);
            return TurnOutput {
                response_text: screen.body_text.clone(),
                screen,
                action_code: String::new(),
                policy: "reprompt".into(),
                latency_ms: started.elapsed().as_millis() as u64,
                accepted: false,
                persist_error: None,
            };
        }

        let now_ms = self.clock.now_ms();
        let mut deps = policy::Deps::new(self, now_ms);
        let scope = session.state.scope();
        let substitution = session
            .state
            .active_task
            .as_ref()
            .and_then(|_| substitution_target(utterance));

        let (code, reply) = match substitution {
            Some(target) => {
                let reply = policy::adapt(&mut deps, &mut session.state, &target);
                (ActionCode::AskQuestion, reply)
            }
            None => {
                let ctx = DecisionContext::new(
                    utterance,
                    session.previous_response(),
                    scope.clone(),
                    session.state.task_summary(),
                );
                let decision = self.decider.decide(&ctx);
                deps.calls += decision.gateway_calls;
                deps.annotations.extend(decision.annotation);
                let code = if decision.code.is_unknown() || scope.contains(&decision.code) {
                    decision.code
                } else {
                    ActionCode::Unknown(decision.code.log_string())
                };
                let reply = policy::dispatch(&mut deps, &mut session.state, &session.history, &code, utterance);
                (code, reply)
            }
        };

        if session.state.phase == SessionPhase::Greeting && !code.is_unknown() {
            session.state.phase = SessionPhase::Search;
        }

        let mut screen = reply.screen;
        screen.body_text = self.safety.apply(&screen.body_text);
        let mut speech = self.safety.apply(&reply.speech);
        if screen.body_text.is_empty() {
            screen.body_text = self.safety.refusal().to_string();
        }
        if speech.is_empty() {
            speech = screen.body_text.clone();
        }

        let last_ts = session.history.last().map_or(0, |t| t.timestamp);
        let turn = Turn {
            user_utterance: utterance.to_string(),
            action_code: code.log_string(),
            policy: reply.policy.to_string(),
            system_response: speech,
            screen,
            timestamp: now_ms.max(last_ts + 1),
            gateway_calls: deps.calls,
            annotations: deps.annotations,
        };
        session.history.push(turn.clone());

        let record = TurnRecord {
            turn: turn.clone(),
            state: session.state.clone(),
        };
        let persist_error = match self.store.append(&session.session_id, &record) {
            Ok(()) => None,
            Err(err) => {
                tracing::error!(session = %session.session_id, error = %err, "failed to persist turn");
                Some(err.to_string())
            }
        };

        TurnOutput {
            response_text: turn.system_response,
            screen: turn.screen,
            action_code: turn.action_code,
            policy: turn.policy,
            latency_ms: started.elapsed().as_millis() as u64,
            accepted: true,
            persist_error,
        }
    }
}
