use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Completion, GatewayError, GenRequest, GenerationBackend};

/// Hex SHA-256 of the slots' canonical JSON (keys sorted).
pub fn slots_digest(slots: &BTreeMap<String, String>) -> String {
    let canonical = serde_json::to_vec(slots).expect("string maps serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// One line of a canned-response file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CannedEntry {
    pub template_id: String,
    pub slots: BTreeMap<String, String>,
    pub text: String,
}

/// Deterministic backend: canned answers keyed by template and slot
/// digest, otherwise an echo of the `question` slot.
#[derive(Clone, Debug, Default)]
pub struct MockBackend {
    canned: HashMap<(String, String), String>,
    failure: Option<GatewayError>,
    delay: Option<Duration>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_canned(mut self, template_id: &str, slots: &BTreeMap<String, String>, text: &str) -> Self {
        self.canned
            .insert((template_id.to_string(), slots_digest(slots)), text.to_string());
        self
    }

    pub fn with_entries(mut self, entries: impl IntoIterator<Item = CannedEntry>) -> Self {
        for e in entries {
            self = self.with_canned(&e.template_id, &e.slots, &e.text);
        }
        self
    }

    /// Loads a JSONL file of [`CannedEntry`] lines.
    pub fn load_canned(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CannedEntry = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::new().with_entries(entries))
    }

    /// Every call fails with `error`.
    pub fn failing(error: GatewayError) -> Self {
        Self {
            failure: Some(error),
            ..Self::default()
        }
    }

    /// Simulated backend latency; longer than the request timeout yields
    /// a timeout error.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn canned_len(&self) -> usize {
        self.canned.len()
    }
}

impl GenerationBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, _prompt: &str, request: &GenRequest) -> Result<Completion, GatewayError> {
        if let Some(delay) = self.delay {
            let budget = Duration::from_millis(request.timeout_ms);
            std::thread::sleep(delay.min(budget));
            if delay > budget {
                return Err(GatewayError::Timeout(request.timeout_ms));
            }
        }
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        let key = (request.template_id.clone(), slots_digest(&request.slots));
        let text = match self.canned.get(&key) {
            Some(text) => text.clone(),
            None => request.slots.get("question").cloned().unwrap_or_default(),
        };
        Ok(Completion { text, truncated: false })
    }
}
