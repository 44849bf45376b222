use std::io;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{Completion, GatewayError, GenRequest, GenerationBackend};

/// Client for the Text Generation Inference `/generate` route.
pub struct TgiBackend {
    endpoint: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    inputs: &'a str,
    parameters: GenerateParameters,
}

#[derive(Serialize)]
struct GenerateParameters {
    max_new_tokens: u32,
    /// TGI rejects 0; leaving it out gives greedy decoding.
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

impl TgiBackend {
    pub fn new(base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            endpoint: format!("{}/generate", base_url.trim_end_matches('/')),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn map_transport(err: ureq::Error, timeout_ms: u64) -> GatewayError {
    match err {
        ureq::Error::Timeout(_) => GatewayError::Timeout(timeout_ms),
        ureq::Error::Io(e) if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
            GatewayError::Timeout(timeout_ms)
        }
        ureq::Error::StatusCode(code) => GatewayError::Status {
            code,
            body: String::new(),
        },
        other => GatewayError::Transport(other.to_string()),
    }
}

/// Accepts `{"generated_text": ...}` or a one-element array of it.
fn parse_generated(body: &str) -> Result<Completion, GatewayError> {
    let value: Value = serde_json::from_str(body).map_err(|e| GatewayError::MalformedBody(e.to_string()))?;
    let object = match &value {
        Value::Array(items) => items.first(),
        other => Some(other),
    };
    let object = object.ok_or_else(|| GatewayError::MalformedBody("empty array".into()))?;
    let text = object
        .get("generated_text")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedBody("missing generated_text".into()))?;
    let truncated = object.pointer("/details/finish_reason").and_then(Value::as_str) == Some("length");
    Ok(Completion {
        text: text.to_string(),
        truncated,
    })
}

impl GenerationBackend for TgiBackend {
    fn id(&self) -> &str {
        "tgi"
    }

    fn complete(&self, prompt: &str, request: &GenRequest) -> Result<Completion, GatewayError> {
        let body = GenerateBody {
            inputs: prompt,
            parameters: GenerateParameters {
                max_new_tokens: request.max_new_tokens,
                temperature: (request.temperature > 0.0).then_some(request.temperature),
            },
        };
        let timeout = Duration::from_millis(request.timeout_ms);
        let mut response = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .send_json(&body)
            .map_err(|e| map_transport(e, request.timeout_ms))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| match map_transport(e, request.timeout_ms) {
                GatewayError::Transport(msg) => GatewayError::MalformedBody(msg),
                other => other,
            })?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Status {
                code: status,
                body: text,
            });
        }
        parse_generated(&text)
    }
}
