//! Builds an [`Engine`] from paths and flags.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use taskbot_core::decision::{DecisionBackend, PatternBackend, RemoteBackend};
use taskbot_core::gateway::{Gateway, GatewayConfig, MockBackend, TemplateRegistry};
use taskbot_core::orchestrator::{Catalog, Engine, JsonlStore, ManualClock, MemoryStore, SafetyFilter, TurnStore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum DeciderChoice {
    #[default]
    Pattern,
    Remote,
}

#[derive(Clone, Debug, Default)]
pub struct EngineOptions {
    pub corpus: PathBuf,
    /// Turn-log directory; `None` keeps logs in memory.
    pub logs: Option<PathBuf>,
    pub gateway: GatewayConfig,
    /// Canned mock responses (JSONL).
    pub canned: Option<PathBuf>,
    /// Template directory overriding the shipped templates.
    pub templates: Option<PathBuf>,
    pub denylist: Option<PathBuf>,
    pub decider: DeciderChoice,
    /// Frozen clock start, for reproducible transcripts.
    pub fixed_clock_ms: Option<u64>,
}

pub fn build_gateway(options: &EngineOptions) -> anyhow::Result<Gateway> {
    let registry = match &options.templates {
        Some(dir) => {
            TemplateRegistry::load_dir(dir).with_context(|| format!("loading templates from {}", dir.display()))?
        }
        None => TemplateRegistry::builtin(),
    };
    let mock = match &options.canned {
        Some(path) => MockBackend::load_canned(path)?,
        None => MockBackend::new(),
    };
    Ok(Gateway::from_config(&options.gateway, registry, mock))
}

pub fn build_engine(options: &EngineOptions) -> anyhow::Result<Engine> {
    let catalog =
        Catalog::load(&options.corpus).with_context(|| format!("loading corpus from {}", options.corpus.display()))?;
    let gateway = Arc::new(build_gateway(options)?);
    let decider: Arc<dyn DecisionBackend> = match options.decider {
        DeciderChoice::Pattern => Arc::new(PatternBackend),
        DeciderChoice::Remote => Arc::new(RemoteBackend::new(gateway.clone())),
    };
    let store: Arc<dyn TurnStore> = match &options.logs {
        Some(dir) => Arc::new(JsonlStore::open(dir.clone()).with_context(|| format!("opening {}", dir.display()))?),
        None => Arc::new(MemoryStore::new()),
    };
    let mut engine = Engine::new(Arc::new(catalog), gateway, decider, store);
    if let Some(path) = &options.denylist {
        engine = engine.with_safety(SafetyFilter::from_file(path)?);
    }
    if let Some(start) = options.fixed_clock_ms {
        engine = engine.with_clock(Arc::new(ManualClock::new(start)));
    }
    Ok(engine)
}
