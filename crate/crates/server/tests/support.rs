//! An in-process server on an ephemeral port plus a small JSON client.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use serde_json::Value;
use taskbot_core::gateway::GatewayConfig;
use taskbot_server::{build_engine, router, AppState, DeciderChoice, EngineOptions};

pub const CLOCK_MS: u64 = 1_760_000_000_000;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn options(logs: Option<&Path>) -> EngineOptions {
    EngineOptions {
        corpus: fixtures().join("corpus"),
        logs: logs.map(Path::to_path_buf),
        gateway: GatewayConfig::default(),
        canned: Some(fixtures().join("mock/canned.jsonl")),
        templates: None,
        denylist: None,
        decider: DeciderChoice::Pattern,
        fixed_clock_ms: Some(CLOCK_MS),
    }
}

/// Serves on a background runtime for the rest of the test process.
pub fn spawn(options: EngineOptions) -> String {
    let engine = build_engine(&options).expect("engine");
    let (tx, rx) = mpsc::channel::<SocketAddr>();
    thread::spawn(move || {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(AppState::new(engine))).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            base: base.into(),
            agent,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn finish(response: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
        let mut response = response.expect("request");
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        Self::finish(self.agent.post(format!("{}{path}", self.base)).send_json(body))
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .send(body),
        )
    }

    pub fn create_session(&self) -> String {
        let (status, body) = self.post("/v1/sessions", &Value::Null);
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    pub fn turn(&self, session: &str, utterance: &str) -> (u16, Value) {
        self.post(
            &format!("/v1/sessions/{session}/turns"),
            &serde_json::json!({ "utterance": utterance }),
        )
    }
}
