//! Policy handlers. Each one reads and updates the session state and
//! returns the reply for the turn.

use std::sync::LazyLock;

use regex::Regex;

use super::timer::{format_duration, parse_duration};
use super::{Catalog, Engine, ResultList, ScreenPayload, SessionState, StepPosition, Timer, Turn};
use crate::action::{ActionCode, SessionPhase};
use crate::gateway::{GatewayError, GenRequest};
use crate::retrieval::{is_vague, match_trajectory, tokenize, KnowledgeIndex};
use crate::taskgraph::{substitute_requirement, MediaKind, Requirement, TaskCursor, TaskGraph};

pub const RESULTS_PAGE_SIZE: usize = 3;
const MAX_RESULTS: usize = 12;
const QA_CHUNKS: usize = 2;
const DIALOGUE_TURNS: usize = 4;

pub const CAPABILITIES_TEXT: &str = "I can find recipes and DIY projects, walk you through them step by step, \
answer questions about the task, list what you need, suggest substitutes for missing items and set timers.";

const STEP_OPTIONS: [&str; 4] = ["previous", "next", "repeat", "requirements"];
const PREVIEW_OPTIONS: [&str; 3] = ["start", "requirements", "cancel"];

pub(crate) struct Reply {
    pub policy: &'static str,
    pub speech: String,
    pub screen: ScreenPayload,
}

impl Reply {
    fn new(policy: &'static str, screen: ScreenPayload) -> Self {
        Self {
            policy,
            speech: screen.body_text.clone(),
            screen,
        }
    }
}

/// Per-turn handles plus the gateway call tally.
pub(crate) struct Deps<'a> {
    pub engine: &'a Engine,
    pub now_ms: u64,
    pub calls: u32,
    pub annotations: Vec<String>,
}

impl<'a> Deps<'a> {
    pub fn new(engine: &'a Engine, now_ms: u64) -> Self {
        Self {
            engine,
            now_ms,
            calls: 0,
            annotations: Vec::new(),
        }
    }

    fn catalog(&self) -> &'a Catalog {
        &self.engine.catalog
    }

    /// Non-empty generated text, or `None` after recording why not.
    fn generate(&mut self, request: GenRequest) -> Option<String> {
        self.calls += 1;
        let gateway = &self.engine.gateway;
        match gateway.generate(&request) {
            Ok(response) if !response.text.trim().is_empty() => Some(response.text.trim().to_string()),
            Ok(_) => {
                self.annotations
                    .push(format!("{}: empty generation", request.template_id));
                None
            }
            Err(err) => {
                self.annotations.push(gateway_note(&request.template_id, &err));
                None
            }
        }
    }

    fn request(&self, template_id: &str) -> GenRequest {
        self.engine.gateway.request(template_id)
    }
}

fn gateway_note(template_id: &str, err: &GatewayError) -> String {
    format!("{template_id}: gateway {:?} error: {err}", err.kind())
}

pub(crate) fn dispatch(
    deps: &mut Deps<'_>,
    state: &mut SessionState,
    history: &[Turn],
    code: &ActionCode,
    utterance: &str,
) -> Reply {
    use ActionCode as A;
    match code {
        A::Search(query) => search(deps, state, query.as_str()),
        A::AskQuestion => question(deps, state, history, utterance),
        A::ChitChat => chitchat(deps, state, history, utterance),
        A::InformCapabilities => capabilities(state, deps.catalog()),
        A::ConfusedUser => confused(state, deps.catalog()),
        A::ShowRequirements => requirements(state),
        A::ShowMoreDetails => details(state),
        A::SetTimer(spec) => timer(deps, state, spec.as_ref().map(|s| s.as_str())),
        A::Unknown(_) => fallback(deps, state, history, utterance),
        _ => navigate(deps, state, history, code),
    }
}

// ---------------------------------------------------------------- screens

fn step_screen(task: &TaskGraph, index: usize, notice: Option<&str>) -> (String, ScreenPayload) {
    let step = &task.steps[index];
    let spoken = step.spoken_text.as_deref().unwrap_or(&step.text);
    let (body, speech) = match notice {
        Some(n) => (format!("{n}\n\n{}", step.text), format!("{n} {spoken}")),
        None => (step.text.clone(), spoken.to_string()),
    };
    let mut screen = ScreenPayload::text(body)
        .with_headline(task.title.clone())
        .with_options(STEP_OPTIONS);
    screen.images = step
        .media
        .iter()
        .filter(|m| m.kind == MediaKind::Image)
        .cloned()
        .collect();
    screen.step_position = Some(StepPosition {
        index: index + 1,
        total: task.steps.len(),
    });
    (speech, screen)
}

fn step_reply(policy: &'static str, state: &SessionState, notice: Option<&str>) -> Option<Reply> {
    let task = state.active_task.as_ref()?;
    let index = state.cursor.as_ref()?.index;
    let (speech, screen) = step_screen(task, index, notice);
    Some(Reply { policy, speech, screen })
}

fn preview_screen(task: &TaskGraph) -> ScreenPayload {
    let mut lines = vec![format!(
        "{} has {} steps and {} things you'll need.",
        task.title,
        task.steps.len(),
        task.requirements.len()
    )];
    if let Some(rating) = task.rating {
        lines.push(format!("Rated {rating:.1} out of 5."));
    }
    if let Some(total) = task.total_duration_seconds {
        lines.push(format!("Takes about {}.", format_duration(u64::from(total))));
    }
    lines.push("Say start to begin, or ask what you need.".into());
    let mut screen = ScreenPayload::text(lines.join("\n"))
        .with_headline(task.title.clone())
        .with_options(PREVIEW_OPTIONS);
    screen.images = task.hero_image.iter().cloned().collect();
    screen
}

fn results_screen(catalog: &Catalog, results: &ResultList, intro: &str) -> ScreenPayload {
    let mut lines = vec![intro.to_string()];
    let mut images = Vec::new();
    let mut options: Vec<String> = Vec::new();
    for (i, id) in results.visible().iter().enumerate() {
        let title = catalog.task(id).map_or(id.as_str(), |t| t.title.as_str());
        lines.push(format!("{}. {title}", i + 1));
        options.push((i + 1).to_string());
        if let Some(hero) = catalog.task(id).and_then(|t| t.hero_image.clone()) {
            images.push(hero);
        }
    }
    if results.has_more() {
        options.push("more results".into());
    }
    lines.push("Say a number to choose one.".into());
    let mut screen = ScreenPayload::text(lines.join("\n"))
        .with_headline(format!("Results for \"{}\"", results.query))
        .with_options(options);
    screen.images = images;
    screen
}

/// Quick replies that are valid in the current state, most useful first.
fn menu(state: &SessionState, catalog: &Catalog) -> Vec<String> {
    let owned = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match state.phase {
        SessionPhase::Execution => owned(&["next", "previous", "repeat", "requirements", "tell me more", "stop"]),
        SessionPhase::TaskPreview => owned(&["start", "requirements", "cancel", "help"]),
        SessionPhase::Results => {
            let mut items: Vec<String> = (1..=state.results.visible().len()).map(|i| i.to_string()).collect();
            if state.results.has_more() {
                items.push("more results".into());
            }
            items.push("cancel".into());
            items
        }
        SessionPhase::Greeting | SessionPhase::Search | SessionPhase::Farewell => {
            let mut items = vec!["what can you do?".to_string()];
            items.extend(catalog.tasks().take(2).map(|t| t.title.to_lowercase()));
            items.push("i'm confused".into());
            items
        }
    }
}

fn context_options(state: &SessionState, catalog: &Catalog) -> Vec<String> {
    if state.phase == SessionPhase::Execution {
        STEP_OPTIONS.iter().map(|s| s.to_string()).collect()
    } else {
        menu(state, catalog)
    }
}

/// Carries the step position over on replies given mid-task.
fn with_step_context(mut screen: ScreenPayload, state: &SessionState) -> ScreenPayload {
    if state.phase == SessionPhase::Execution {
        if let (Some(task), Some(cursor)) = (&state.active_task, &state.cursor) {
            screen.step_position = Some(StepPosition {
                index: cursor.index + 1,
                total: task.steps.len(),
            });
            if screen.headline.is_none() {
                screen.headline = Some(task.title.clone());
            }
        }
    }
    screen
}

pub(crate) fn reprompt(state: &SessionState, catalog: &Catalog) -> ScreenPayload {
    ScreenPayload::text("I didn't catch that. What would you like to do?").with_options(menu(state, catalog))
}

fn dialogue(history: &[Turn]) -> String {
    let start = history.len().saturating_sub(DIALOGUE_TURNS);
    history[start..]
        .iter()
        .map(|t| format!("User: {}\nAssistant: {}", t.user_utterance, t.system_response))
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------- navigation

fn prompt_start(state: &SessionState) -> Reply {
    let title = state.active_task.as_ref().map_or("this task", |t| t.title.as_str());
    Reply::new(
        "navigate",
        ScreenPayload::text(format!("Say start when you're ready to begin {title}."))
            .with_headline(title.to_string())
            .with_options(PREVIEW_OPTIONS),
    )
}

fn last_screen(history: &[Turn], state: &SessionState, catalog: &Catalog, notice: Option<&str>) -> Reply {
    match history.last() {
        Some(turn) => {
            let mut screen = turn.screen.clone();
            let mut speech = turn.system_response.clone();
            if let Some(n) = notice {
                screen.body_text = format!("{n}\n\n{}", screen.body_text);
                speech = format!("{n} {speech}");
            }
            Reply {
                policy: "navigate",
                speech,
                screen,
            }
        }
        None => Reply::new(
            "navigate",
            ScreenPayload::text("Hi! What would you like to make or fix today?").with_options(menu(state, catalog)),
        ),
    }
}

fn navigate(deps: &mut Deps<'_>, state: &mut SessionState, history: &[Turn], code: &ActionCode) -> Reply {
    use ActionCode as A;
    let catalog = deps.catalog();
    let executing = state.phase == SessionPhase::Execution && state.active_task.is_some();
    match code {
        A::Next if executing => {
            let len = state.active_task.as_ref().map_or(0, |t| t.steps.len());
            let cursor = state.cursor.as_mut().expect("cursor accompanies the active task");
            if cursor.index + 1 < len {
                cursor.index += 1;
                step_reply("navigate", state, None).expect("executing")
            } else {
                complete(state, catalog)
            }
        }
        A::Previous if executing => {
            let cursor = state.cursor.as_mut().expect("cursor accompanies the active task");
            if cursor.index == 0 {
                step_reply("navigate", state, Some("You're already at the first step.")).expect("executing")
            } else {
                cursor.index -= 1;
                step_reply("navigate", state, None).expect("executing")
            }
        }
        A::Restart if executing => {
            if let Some(cursor) = state.cursor.as_mut() {
                cursor.index = 0;
            }
            step_reply("navigate", state, Some("Starting over from the first step.")).expect("executing")
        }
        A::StepSelect(n) if executing => {
            let len = state.active_task.as_ref().map_or(0, |t| t.steps.len());
            let wanted = n.get() as usize;
            if wanted <= len {
                if let Some(cursor) = state.cursor.as_mut() {
                    cursor.index = wanted - 1;
                }
                step_reply("navigate", state, None).expect("executing")
            } else {
                let notice = format!("This task only has {len} steps.");
                step_reply("navigate", state, Some(&notice)).expect("executing")
            }
        }
        A::Repeat if executing => step_reply("navigate", state, None).expect("executing"),
        A::Yes | A::No if executing => step_reply("navigate", state, Some("Okay.")).expect("executing"),
        A::Pause if executing => step_reply(
            "navigate",
            state,
            Some("Paused. Say repeat when you're ready to continue."),
        )
        .expect("executing"),
        A::StartTask | A::Yes if state.phase == SessionPhase::TaskPreview => {
            let Some(task) = state.active_task.as_ref() else {
                return prompt_start(state);
            };
            state.cursor = Some(TaskCursor::start(task));
            state.phase = SessionPhase::Execution;
            step_reply("navigate", state, Some("Let's get started.")).expect("task started")
        }
        A::No if state.phase == SessionPhase::TaskPreview => Reply::new(
            "navigate",
            ScreenPayload::text("No problem. Say cancel to look for something else, or start when you're ready.")
                .with_options(PREVIEW_OPTIONS),
        ),
        A::Next | A::Previous | A::Restart | A::StepSelect(_) => prompt_start(state),
        A::Select(n) => select(state, catalog, n.get() as usize),
        A::ShowMoreResults => more_results(state, catalog),
        A::Stop if executing => {
            let title = state.active_task.as_ref().map(|t| t.title.clone()).unwrap_or_default();
            state.clear_task();
            state.phase = SessionPhase::Farewell;
            Reply::new(
                "navigate",
                ScreenPayload::text(format!(
                    "Okay, I've stopped {title}. Let me know if you want to find something else."
                ))
                .with_options(menu(state, catalog)),
            )
        }
        A::Stop | A::Cancel => {
            state.clear_task();
            state.results = ResultList::default();
            state.phase = SessionPhase::Search;
            let text = if matches!(code, A::Cancel) {
                "Cancelled. What would you like to find?"
            } else {
                "Okay. What would you like to do next?"
            };
            Reply::new("navigate", ScreenPayload::text(text).with_options(menu(state, catalog)))
        }
        A::Pause => last_screen(history, state, catalog, Some("Paused.")),
        A::Yes | A::No => last_screen(history, state, catalog, Some("Okay.")),
        _ => last_screen(history, state, catalog, None),
    }
}

fn complete(state: &mut SessionState, catalog: &Catalog) -> Reply {
    let title = state.active_task.as_ref().map(|t| t.title.clone()).unwrap_or_default();
    state.clear_task();
    state.phase = SessionPhase::Farewell;
    Reply::new(
        "navigate",
        ScreenPayload::text(format!(
            "That was the last step. You're all done with {title}! Want to find something else?"
        ))
        .with_headline(title)
        .with_options(menu(state, catalog)),
    )
}

fn select(state: &mut SessionState, catalog: &Catalog, n: usize) -> Reply {
    let available = state.results.task_ids.len().saturating_sub(state.results.offset);
    let task = state
        .results
        .task_ids
        .get(state.results.offset + n - 1)
        .and_then(|id| catalog.task(id));
    let Some(task) = task else {
        let text = if available == 0 {
            "There are no results to choose from. Try a search first.".to_string()
        } else {
            format!("Please choose a number between 1 and {available}.")
        };
        return Reply::new("navigate", ScreenPayload::text(text).with_options(menu(state, catalog)));
    };
    state.cursor = Some(TaskCursor::start(task));
    state.active_task = Some(task.clone());
    state.phase = SessionPhase::TaskPreview;
    Reply::new("navigate", preview_screen(task))
}

fn more_results(state: &mut SessionState, catalog: &Catalog) -> Reply {
    if !state.results.has_more() {
        let mut screen = results_screen(catalog, &state.results, "That's all the results I have.");
        if state.phase == SessionPhase::TaskPreview {
            screen.options.push("cancel".into());
        }
        return Reply::new("navigate", screen);
    }
    state.results.offset += RESULTS_PAGE_SIZE;
    state.clear_task();
    state.phase = SessionPhase::Results;
    Reply::new(
        "navigate",
        results_screen(catalog, &state.results, "Here are more results:"),
    )
}

// ---------------------------------------------------------------- search

fn search(deps: &mut Deps<'_>, state: &mut SessionState, query: &str) -> Reply {
    let catalog = deps.catalog();
    state.clear_task();
    if is_vague(query, catalog.index()) {
        if let Some(trajectory) = match_trajectory(query, catalog.trajectories()) {
            state.results = ResultList::default();
            state.phase = SessionPhase::Search;
            return Reply::new(
                "search",
                ScreenPayload::text(trajectory.elicitation_prompt.clone())
                    .with_options(trajectory.member_queries.iter().take(RESULTS_PAGE_SIZE).cloned()),
            );
        }
    }
    let hits = catalog.index().search(query, MAX_RESULTS);
    let task_ids: Vec<String> = hits
        .into_iter()
        .map(|h| h.doc_id)
        .filter(|id| catalog.task(id).is_some())
        .collect();
    if task_ids.is_empty() {
        state.results = ResultList::default();
        state.phase = SessionPhase::Search;
        return Reply::new(
            "search",
            ScreenPayload::text(format!(
                "I couldn't find anything for \"{query}\". Try different words."
            ))
            .with_options(menu(state, catalog)),
        );
    }
    state.results = ResultList {
        query: query.to_string(),
        task_ids,
        offset: 0,
    };
    state.phase = SessionPhase::Results;
    let intro = format!("Here is what I found for \"{query}\":");
    Reply::new("search", results_screen(catalog, &state.results, &intro))
}

// ---------------------------------------------------------------- generation-backed

fn question(deps: &mut Deps<'_>, state: &SessionState, history: &[Turn], utterance: &str) -> Reply {
    let catalog = deps.catalog();
    let mut context: Vec<String> = Vec::new();
    if let (Some(task), Some(cursor)) = (&state.active_task, &state.cursor) {
        if state.phase == SessionPhase::Execution {
            context.push(format!("Current step: {}", task.steps[cursor.index].text));
        }
    }
    let chunks: Vec<String> = match &state.active_task {
        Some(task) => KnowledgeIndex::new(task.knowledge.clone())
            .top_k(utterance, QA_CHUNKS)
            .into_iter()
            .map(|c| c.text.clone())
            .collect(),
        None => catalog
            .knowledge()
            .top_k(utterance, QA_CHUNKS)
            .into_iter()
            .map(|c| c.text.clone())
            .collect(),
    };
    context.extend(chunks);
    let request = deps
        .request("qa")
        .slot("context", context.join("\n\n"))
        .slot("dialogue", dialogue(history))
        .slot("question", utterance);
    let body = match deps.generate(request) {
        Some(answer) => answer,
        None => format!("Sorry, I can't answer that right now. {CAPABILITIES_TEXT}"),
    };
    let screen = ScreenPayload::text(body).with_options(context_options(state, catalog));
    Reply::new("question", with_step_context(screen, state))
}

fn chitchat(deps: &mut Deps<'_>, state: &SessionState, history: &[Turn], utterance: &str) -> Reply {
    let request = deps
        .request("chitchat")
        .slot("dialogue", dialogue(history))
        .slot("question", utterance);
    let body = deps.generate(request).unwrap_or_else(|| {
        "I'm always happy to chat, but I'm best at recipes and DIY projects. What would you like to make?".into()
    });
    let screen = ScreenPayload::text(body).with_options(context_options(state, deps.catalog()));
    Reply::new("chitchat", with_step_context(screen, state))
}

fn fallback(deps: &mut Deps<'_>, state: &SessionState, history: &[Turn], utterance: &str) -> Reply {
    let catalog = deps.catalog();
    let options = menu(state, catalog);
    let repeated = history.last().is_some_and(|t| t.policy == "fallback");
    if repeated {
        let listed: Vec<String> = options.iter().map(|o| format!("- {o}")).collect();
        let body = format!(
            "I'm still not sure what you mean. Here is what you can say:\n{}",
            listed.join("\n")
        );
        let screen = ScreenPayload::text(body).with_options(options);
        return Reply::new("fallback", with_step_context(screen, state));
    }
    let request = deps
        .request("fallback")
        .slot("capabilities", CAPABILITIES_TEXT)
        .slot("dialogue", dialogue(history))
        .slot("question", utterance);
    let body = deps
        .generate(request)
        .unwrap_or_else(|| format!("I'm not sure how to help with that. {CAPABILITIES_TEXT}"));
    let screen = ScreenPayload::text(body).with_options(options.into_iter().take(3));
    Reply::new("fallback", with_step_context(screen, state))
}

// ---------------------------------------------------------------- task helpers

fn requirements(state: &SessionState) -> Reply {
    let Some(task) = &state.active_task else {
        return Reply::new(
            "requirements",
            ScreenPayload::text("Pick a task first and I'll tell you what you need."),
        );
    };
    let body = if task.requirements.is_empty() {
        format!("{} doesn't need anything special.", task.title)
    } else {
        let lines: Vec<String> = task
            .requirements
            .iter()
            .map(|r| format!("- {}", r.display_line()))
            .collect();
        format!("For {} you'll need:\n{}", task.title, lines.join("\n"))
    };
    let options: Vec<&str> = if state.phase == SessionPhase::Execution {
        STEP_OPTIONS.to_vec()
    } else {
        vec!["start", "cancel"]
    };
    let mut screen = ScreenPayload::text(body)
        .with_headline(task.title.clone())
        .with_options(options);
    screen.requirements_view = Some(task.requirements.clone());
    Reply::new("requirements", with_step_context(screen, state))
}

fn details(state: &SessionState) -> Reply {
    let (Some(task), Some(cursor)) = (&state.active_task, &state.cursor) else {
        return Reply::new(
            "details",
            ScreenPayload::text("Pick a task first and I can tell you more."),
        );
    };
    if state.phase != SessionPhase::Execution {
        let lines: Vec<String> = task
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s.text))
            .collect();
        let body = format!("Here is an overview of {}:\n{}", task.title, lines.join("\n"));
        return Reply::new(
            "details",
            ScreenPayload::text(body)
                .with_headline(task.title.clone())
                .with_options(PREVIEW_OPTIONS),
        );
    }
    let step = &task.steps[cursor.index];
    let notice = match &step.details {
        Some(d) => d.clone(),
        None => "That's all the detail I have for this step.".to_string(),
    };
    let (speech, screen) = step_screen(task, cursor.index, Some(&notice));
    Reply {
        policy: "details",
        speech,
        screen,
    }
}

fn timer(deps: &mut Deps<'_>, state: &mut SessionState, spec: Option<&str>) -> Reply {
    let step_duration = match (&state.active_task, &state.cursor) {
        (Some(task), Some(cursor)) => task.steps[cursor.index].duration_seconds.map(u64::from),
        _ => None,
    };
    let (seconds, label) = match spec {
        Some(spec) => (parse_duration(spec), spec.to_string()),
        None => (step_duration, String::new()),
    };
    let body = match seconds {
        Some(seconds) => {
            let label = if label.is_empty() {
                let step = state.cursor.as_ref().map_or(1, |c| c.index + 1);
                format!("step {step}")
            } else {
                label
            };
            state.timers.push(Timer {
                label,
                duration_seconds: seconds,
                created_at: deps.now_ms,
            });
            format!("Timer set for {}.", format_duration(seconds))
        }
        None if spec.is_some() => {
            "Sorry, I didn't understand that duration. Try \"set a timer for 10 minutes\".".into()
        }
        None => "How long should the timer be? Try \"set a timer for 10 minutes\".".into(),
    };
    let screen = ScreenPayload::text(body).with_options(context_options(state, deps.catalog()));
    Reply::new("timer", with_step_context(screen, state))
}

fn capabilities(state: &SessionState, catalog: &Catalog) -> Reply {
    let screen = ScreenPayload::text(format!("{CAPABILITIES_TEXT} Here are some things you can say."))
        .with_options(menu(state, catalog));
    Reply::new("capabilities", with_step_context(screen, state))
}

fn confused(state: &SessionState, catalog: &Catalog) -> Reply {
    let text = match (state.phase, &state.active_task, &state.cursor) {
        (SessionPhase::Execution, Some(task), Some(cursor)) => format!(
            "No worries. You're on step {} of {} of {}. Say next or previous to move, repeat to hear this step again, or ask me a question.",
            cursor.index + 1,
            task.steps.len(),
            task.title
        ),
        (SessionPhase::TaskPreview, _, _) => {
            "No worries. Say start to begin this task, requirements to see what you need, or cancel to pick something else.".into()
        }
        (SessionPhase::Results, _, _) => {
            "No worries. Say a number to pick one of the results, more results to see others, or search for something new.".into()
        }
        _ => "No worries. Tell me what you'd like to make or fix, like a dish or a home repair, and I'll find instructions.".into(),
    };
    let screen = ScreenPayload::text(text).with_options(menu(state, catalog));
    Reply::new("confused", with_step_context(screen, state))
}

// ---------------------------------------------------------------- adaptation

static SUBSTITUTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:i\s+(?:don't|do not|dont|didn't)\s+have|i'm out of|i am out of|i ran out of|i've run out of|we don't have|replace|substitute|swap(?:\s+out)?)\s+(?:any\s+|some\s+|the\s+|a\s+|an\s+|my\s+)?(?P<x>.+?)(?:\s+(?:with|for)\s+(?P<y>.+?))?[.!?]*$",
    )
    .unwrap()
});

/// A substitution request: the missing item and, when the user named
/// one, the replacement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionTarget {
    pub missing: String,
    pub replacement: Option<String>,
}

pub fn substitution_target(utterance: &str) -> Option<SubstitutionTarget> {
    let collapsed = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
    let caps = SUBSTITUTION.captures(&collapsed)?;
    let missing = caps["x"].trim().to_string();
    if missing.is_empty() {
        return None;
    }
    Some(SubstitutionTarget {
        missing,
        replacement: caps.name("y").map(|m| m.as_str().trim().to_string()),
    })
}

/// Exact name first, then token containment in either direction.
fn find_requirement<'a>(task: &'a TaskGraph, missing: &str) -> Option<&'a Requirement> {
    let wanted = missing.to_lowercase();
    if let Some(r) = task.requirements.iter().find(|r| r.name.to_lowercase() == wanted) {
        return Some(r);
    }
    let wanted_tokens = tokenize(missing);
    if wanted_tokens.is_empty() {
        return None;
    }
    task.requirements.iter().find(|r| {
        let name_tokens = tokenize(&r.name);
        !name_tokens.is_empty()
            && (wanted_tokens.iter().all(|t| name_tokens.contains(t))
                || name_tokens.iter().all(|t| wanted_tokens.contains(t)))
    })
}

pub(crate) fn adapt(deps: &mut Deps<'_>, state: &mut SessionState, target: &SubstitutionTarget) -> Reply {
    let catalog = deps.catalog();
    let Some(task) = state.active_task.clone() else {
        return Reply::new(
            "adapt",
            ScreenPayload::text("Pick a task first and I can help adapt it."),
        );
    };
    let options = context_options(state, catalog);
    let Some(found) = find_requirement(&task, &target.missing) else {
        let text = format!(
            "I couldn't find {} in what you need for {}. Which item do you want to replace?",
            target.missing, task.title
        );
        let mut screen = ScreenPayload::text(text).with_options(options);
        screen.requirements_view = Some(task.requirements.clone());
        return Reply::new("adapt", with_step_context(screen, state));
    };
    let replacement = match &target.replacement {
        Some(r) => Some(r.clone()),
        None => {
            let request = deps
                .request("substitute")
                .slot("task_title", task.title.as_str())
                .slot("requirement", found.name.as_str())
                .slot("quantity", found.quantity.clone().unwrap_or_default());
            deps.generate(request).and_then(|text| {
                let line = text.lines().next().unwrap_or("").trim().trim_end_matches('.').trim();
                (!line.is_empty()).then(|| line.to_string())
            })
        }
    };
    let Some(replacement) = replacement else {
        let text = format!(
            "I couldn't find a substitute for {} right now. Say next to carry on without it.",
            found.name
        );
        return Reply::new(
            "adapt",
            with_step_context(ScreenPayload::text(text).with_options(options), state),
        );
    };
    let new_requirement = Requirement {
        name: replacement.clone(),
        quantity: found.quantity.clone(),
        optional_flag: found.optional_flag,
    };
    let old_name = found.name.clone();
    let updated = match substitute_requirement(&task, &old_name, new_requirement) {
        Ok(updated) => updated,
        Err(err) => {
            deps.annotations.push(format!("substitution rejected: {err}"));
            let text = format!("I couldn't swap {old_name} for {replacement}. Say next to carry on without it.");
            return Reply::new(
                "adapt",
                with_step_context(ScreenPayload::text(text).with_options(options), state),
            );
        }
    };
    deps.annotations
        .push(format!("substituted {old_name} -> {replacement}"));
    let text = format!("You can use {replacement} instead of {old_name}. I've updated your list.");
    let mut screen = ScreenPayload::text(text)
        .with_headline(format!("{old_name} → {replacement}"))
        .with_options(options);
    screen.requirements_view = Some(updated.requirements.clone());
    state.active_task = Some(updated);
    Reply::new("adapt", with_step_context(screen, state))
}
