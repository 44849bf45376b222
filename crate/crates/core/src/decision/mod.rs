//! Mapping (utterance, previous response, scope) to a validated action code.

mod dataset;
mod pattern;

pub use dataset::{
    evaluate, evaluate_lines, CategoryScore, ConfusionEntry, DecisionRecord, DecisionReport, RecordLine,
};
pub use pattern::decide_pattern;

use crate::action::{parse_action, ActionCode, ActionScope};
use crate::gateway::Gateway;

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionContext {
    pub utterance: String,
    pub previous_system_response: String,
    pub scope: ActionScope,
    /// Title and current step, empty without an active task.
    pub task_state_summary: String,
}

impl DecisionContext {
    pub fn new(
        utterance: impl Into<String>,
        previous_system_response: impl Into<String>,
        scope: ActionScope,
        task_state_summary: impl Into<String>,
    ) -> Self {
        Self {
            utterance: utterance.into(),
            previous_system_response: previous_system_response.into(),
            scope,
            task_state_summary: task_state_summary.into(),
        }
    }
}

/// A decision plus anything worth recording in the turn log.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub code: ActionCode,
    pub annotation: Option<String>,
    pub gateway_calls: u32,
}

impl From<ActionCode> for Decision {
    fn from(code: ActionCode) -> Self {
        Self {
            code,
            annotation: None,
            gateway_calls: 0,
        }
    }
}

pub const NDP_TEMPLATE: &str = "ndp";

/// Asks the model for an action code and validates it against the scope.
pub fn decide_remote(ctx: &DecisionContext, gateway: &Gateway) -> Decision {
    let actions = ctx.scope.templates().join("\n");
    let request = gateway
        .request(NDP_TEMPLATE)
        .slot("actions", actions)
        .slot("task_state", ctx.task_state_summary.as_str())
        .slot("previous_system_response", ctx.previous_system_response.as_str())
        .slot("utterance", ctx.utterance.as_str());
    match gateway.generate(&request) {
        Ok(response) => {
            let line = response
                .text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty())
                .unwrap_or("");
            let code = parse_action(line);
            let code = if code.is_unknown() || !ctx.scope.contains(&code) {
                ActionCode::Unknown(line.to_string())
            } else {
                code
            };
            Decision {
                code,
                annotation: None,
                gateway_calls: 1,
            }
        }
        Err(err) => Decision {
            code: ActionCode::Unknown(ctx.utterance.clone()),
            annotation: Some(format!("decision gateway error: {err}")),
            gateway_calls: 1,
        },
    }
}

pub trait DecisionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn decide(&self, ctx: &DecisionContext) -> Decision;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PatternBackend;

impl DecisionBackend for PatternBackend {
    fn id(&self) -> &str {
        "pattern"
    }

    fn decide(&self, ctx: &DecisionContext) -> Decision {
        decide_pattern(ctx).into()
    }
}

pub struct RemoteBackend {
    gateway: std::sync::Arc<Gateway>,
}

impl RemoteBackend {
    pub fn new(gateway: std::sync::Arc<Gateway>) -> Self {
        Self { gateway }
    }
}

impl DecisionBackend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn decide(&self, ctx: &DecisionContext) -> Decision {
        decide_remote(ctx, &self.gateway)
    }
}

impl<F> DecisionBackend for F
where
    F: Fn(&DecisionContext) -> ActionCode + Send + Sync,
{
    fn id(&self) -> &str {
        "fn"
    }

    fn decide(&self, ctx: &DecisionContext) -> Decision {
        self(ctx).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{scope_for, SessionPhase};
    use crate::gateway::{Completion, GatewayError, GenRequest, GenerationBackend, MockBackend, TemplateRegistry};

    struct Fixed(&'static str);

    impl GenerationBackend for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _prompt: &str, _req: &GenRequest) -> Result<Completion, GatewayError> {
            Ok(Completion {
                text: self.0.to_string(),
                truncated: false,
            })
        }
    }

    fn remote(output: &'static str, phase: SessionPhase, task: bool, visible: usize) -> Decision {
        let gw = Gateway::new(TemplateRegistry::builtin(), Fixed(output));
        let ctx = DecisionContext::new("anything", "prev", scope_for(phase, task, visible), "");
        decide_remote(&ctx, &gw)
    }

    #[test]
    fn remote_parses_and_validates() {
        assert_eq!(
            remote("select(2)", SessionPhase::Results, false, 3).code,
            ActionCode::select(2).unwrap()
        );
        assert_eq!(
            remote("  \nselect(2)\nnext", SessionPhase::Results, false, 3).code,
            ActionCode::select(2).unwrap()
        );
        assert_eq!(
            remote("fly_to_moon()", SessionPhase::Results, false, 3).code,
            ActionCode::Unknown("fly_to_moon()".into())
        );
        assert_eq!(
            remote("next", SessionPhase::Search, false, 0).code,
            ActionCode::Unknown("next".into())
        );
    }

    #[test]
    fn remote_degrades_on_gateway_errors() {
        let gw = Gateway::mock(MockBackend::failing(GatewayError::Transport("refused".into())));
        let ctx = DecisionContext::new("next", "", scope_for(SessionPhase::Execution, true, 0), "Pie, step 1");
        let d = decide_remote(&ctx, &gw);
        assert_eq!(d.code, ActionCode::Unknown("next".into()));
        assert!(d.annotation.unwrap().contains("refused"));
    }

    #[test]
    fn ndp_prompt_embeds_scope_and_turn() {
        let gw = Gateway::mock(MockBackend::new());
        let scope = scope_for(SessionPhase::Results, false, 3);
        let req = gw
            .request(NDP_TEMPLATE)
            .slot("actions", scope.templates().join("\n"))
            .slot("task_state", "")
            .slot("previous_system_response", "Here are 3 results")
            .slot("utterance", "the second one");
        let prompt = gw.render(&req).unwrap();
        assert!(prompt.contains("select(int)"));
        assert!(!prompt.contains("next"));
        assert!(prompt.contains("Here are 3 results"));
        assert!(prompt.contains("the second one"));
    }
}
