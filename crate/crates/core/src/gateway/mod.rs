//! Generative-model gateway.
//!
//! Requests name a prompt template and fill its slots; the gateway renders
//! the prompt and hands it to a backend: a TGI-compatible HTTP server or a
//! deterministic mock. In-flight requests are capped; callers beyond the
//! cap queue for at most the request timeout.

mod http;
mod mock;
mod template;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

pub use http::TgiBackend;
pub use mock::{slots_digest, CannedEntry, MockBackend};
pub use template::{render_prompt, PromptTemplate, TemplateRegistry, SHIPPED_TEMPLATES};

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 256;
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub template_id: String,
    pub slots: BTreeMap<String, String>,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub timeout_ms: u64,
}

impl GenRequest {
    pub fn new(template_id: impl Into<String>) -> Self {
        Self {
            template_id: template_id.into(),
            slots: BTreeMap::new(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            temperature: 0.0,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    pub fn slot(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.insert(name.into(), value.into());
        self
    }

    pub fn timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub truncated: bool,
}

/// Raw backend output before the gateway stamps id and latency.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub text: String,
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayErrorKind {
    UnknownTemplate,
    MissingSlot,
    Transport,
    Status,
    MalformedBody,
    Timeout,
    Saturated,
    Config,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("template {0:?} is not registered")]
    UnknownTemplate(String),
    #[error("missing slot {0:?}")]
    MissingSlot(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend answered with status {code}")]
    Status { code: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedBody(String),
    #[error("backend did not answer within {0} ms")]
    Timeout(u64),
    #[error("no gateway slot became free within {0} ms")]
    Saturated(u64),
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    pub fn kind(&self) -> GatewayErrorKind {
        match self {
            GatewayError::UnknownTemplate(_) => GatewayErrorKind::UnknownTemplate,
            GatewayError::MissingSlot(_) => GatewayErrorKind::MissingSlot,
            GatewayError::Transport(_) => GatewayErrorKind::Transport,
            GatewayError::Status { .. } => GatewayErrorKind::Status,
            GatewayError::MalformedBody(_) => GatewayErrorKind::MalformedBody,
            GatewayError::Timeout(_) => GatewayErrorKind::Timeout,
            GatewayError::Saturated(_) => GatewayErrorKind::Saturated,
            GatewayError::Config(_) => GatewayErrorKind::Config,
        }
    }
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str, request: &GenRequest) -> Result<Completion, GatewayError>;
}

/// Counting semaphore with a bounded wait.
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock() -= 1;
        self.0.freed.notify_one();
    }
}

impl Limiter {
    fn new(cap: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self, wait: Duration) -> Option<Permit<'_>> {
        let deadline = Instant::now() + wait;
        let mut in_flight = self.in_flight.lock();
        while *in_flight >= self.cap {
            if self.freed.wait_until(&mut in_flight, deadline).timed_out() && *in_flight >= self.cap {
                return None;
            }
        }
        *in_flight += 1;
        Some(Permit(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Mock,
    Http,
}

impl std::str::FromStr for BackendChoice {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendChoice::Mock),
            "http" => Ok(BackendChoice::Http),
            other => Err(GatewayError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatewayConfig {
    pub backend: BackendChoice,
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Mock,
            base_url: "http://127.0.0.1:8080".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl GatewayConfig {
    /// Reads `GATEWAY_BACKEND`, `GATEWAY_BASE_URL`, `GATEWAY_TIMEOUT_MS`
    /// and `GATEWAY_MAX_IN_FLIGHT`, keeping defaults for unset variables.
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let mut config = Self::default();
        if let Some(backend) = lookup("GATEWAY_BACKEND") {
            config.backend = backend.parse()?;
        }
        if let Some(url) = lookup("GATEWAY_BASE_URL") {
            config.base_url = url;
        }
        if let Some(ms) = lookup("GATEWAY_TIMEOUT_MS") {
            config.timeout_ms = ms
                .trim()
                .parse()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| GatewayError::Config(format!("GATEWAY_TIMEOUT_MS={ms:?}")))?;
        }
        if let Some(cap) = lookup("GATEWAY_MAX_IN_FLIGHT") {
            config.max_in_flight = cap
                .trim()
                .parse()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| GatewayError::Config(format!("GATEWAY_MAX_IN_FLIGHT={cap:?}")))?;
        }
        Ok(config)
    }
}

/// Shareable handle over a template registry and one backend.
pub struct Gateway {
    registry: TemplateRegistry,
    backend: Box<dyn GenerationBackend>,
    limiter: Limiter,
    default_timeout_ms: u64,
}

impl Gateway {
    pub fn new(registry: TemplateRegistry, backend: impl GenerationBackend + 'static) -> Self {
        Self {
            registry,
            backend: Box::new(backend),
            limiter: Limiter::new(DEFAULT_MAX_IN_FLIGHT),
            default_timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    /// Mock backend over the shipped templates.
    pub fn mock(backend: MockBackend) -> Self {
        Self::new(TemplateRegistry::builtin(), backend)
    }

    pub fn from_config(config: &GatewayConfig, registry: TemplateRegistry, mock: MockBackend) -> Self {
        let gateway = match config.backend {
            BackendChoice::Mock => Self::new(registry, mock),
            BackendChoice::Http => Self::new(registry, TgiBackend::new(&config.base_url)),
        };
        gateway
            .with_max_in_flight(config.max_in_flight)
            .with_default_timeout(config.timeout_ms)
    }

    pub fn with_max_in_flight(mut self, cap: usize) -> Self {
        self.limiter = Limiter::new(cap);
        self
    }

    pub fn with_default_timeout(mut self, timeout_ms: u64) -> Self {
        self.default_timeout_ms = timeout_ms;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }

    /// A request for `template_id` carrying this gateway's default timeout.
    pub fn request(&self, template_id: &str) -> GenRequest {
        GenRequest::new(template_id).timeout_ms(self.default_timeout_ms)
    }

    pub fn render(&self, request: &GenRequest) -> Result<String, GatewayError> {
        let template = self
            .registry
            .get(&request.template_id)
            .ok_or_else(|| GatewayError::UnknownTemplate(request.template_id.clone()))?;
        template.render(&request.slots)
    }

    pub fn generate(&self, request: &GenRequest) -> Result<GenResponse, GatewayError> {
        let prompt = self.render(request)?;
        let started = Instant::now();
        let _permit = self
            .limiter
            .acquire(Duration::from_millis(request.timeout_ms))
            .ok_or(GatewayError::Saturated(request.timeout_ms))?;
        let completion = self.backend.complete(&prompt, request)?;
        Ok(GenResponse {
            text: completion.text,
            backend_id: self.backend.id().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
            truncated: completion.truncated,
        })
    }
}
