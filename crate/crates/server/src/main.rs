use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use taskbot_core::decision::{evaluate_lines, DecisionBackend, PatternBackend, RemoteBackend};
use taskbot_core::gateway::{BackendChoice, GatewayConfig};
use taskbot_core::orchestrator::{read_log, Catalog, INDEX_FILE, TRAJECTORIES_FILE};
use taskbot_core::retrieval::{build_index, build_trajectories, is_vague, write_trajectories};
use taskbot_core::taskgraph::read_corpus;
use taskbot_server::setup::build_gateway;
use taskbot_server::transcript::format_transcript;
use taskbot_server::{build_engine, router, AppState, DeciderChoice, EngineOptions};

#[derive(Parser)]
#[command(name = "taskbot", version, about = "Task assistant service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct GatewayArgs {
    /// Generation backend; defaults to GATEWAY_BACKEND, then mock.
    #[arg(long, value_parser = ["mock", "http"])]
    gateway: Option<String>,
    /// Canned mock responses (JSONL).
    #[arg(long)]
    canned: Option<PathBuf>,
    /// Directory of prompt templates overriding the shipped ones.
    #[arg(long)]
    templates: Option<PathBuf>,
}

impl GatewayArgs {
    fn config(&self) -> anyhow::Result<GatewayConfig> {
        let mut config = GatewayConfig::from_env()?;
        if let Some(choice) = &self.gateway {
            config.backend = choice.parse::<BackendChoice>()?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port.
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "logs")]
        logs: PathBuf,
        #[command(flatten)]
        gateway: GatewayArgs,
        #[arg(long, value_enum, default_value_t = DeciderChoice::Pattern)]
        decider: DeciderChoice,
        #[arg(long)]
        denylist: Option<PathBuf>,
        /// Freeze the clock at this many milliseconds since the epoch.
        #[arg(long)]
        fixed_clock_ms: Option<u64>,
    },
    /// Pretty-print a session log.
    Replay { log: PathBuf },
    /// Run one query against a corpus index.
    Search {
        query: String,
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Build a corpus from HTML pages.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated: spoken, media, llm.
        #[arg(long, default_value = "spoken,media")]
        augmenters: String,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Score a decision backend on a labelled dataset; prints JSON.
    EvalNdp {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = DeciderChoice::Pattern)]
        backend: DeciderChoice,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Write index.json, and trajectories.jsonl from a query log, into a corpus.
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        /// One query per line.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Feed a file of utterances (one per line) through one session and
    /// print the transcript.
    Script {
        script: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value = "scripted")]
        session_id: String,
        #[command(flatten)]
        gateway: GatewayArgs,
        #[arg(long)]
        fixed_clock_ms: Option<u64>,
    },
    /// Share of utterances (one per line) routed to the fallback policy
    /// when each opens a fresh session, as JSON.
    FallbackRate {
        utterances: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = DeciderChoice::Pattern)]
        decider: DeciderChoice,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve {
            corpus,
            host,
            port,
            logs,
            gateway,
            decider,
            denylist,
            fixed_clock_ms,
        } => {
            let options = EngineOptions {
                corpus,
                logs: Some(logs),
                gateway: gateway.config()?,
                canned: gateway.canned,
                templates: gateway.templates,
                denylist,
                decider,
                fixed_clock_ms,
            };
            let engine = build_engine(&options)?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("parsing listen address")?;
            serve(engine, addr)
        }
        Command::Replay { log } => {
            let records = read_log(&log)?;
            print!("{}", format_transcript(&records));
            Ok(())
        }
        Command::Search { query, corpus, k } => {
            let catalog = Catalog::load(&corpus)?;
            if is_vague(&query, catalog.index()) {
                println!("(vague query)");
            }
            for (rank, hit) in catalog.index().search(&query, k).iter().enumerate() {
                let title = catalog.task(&hit.doc_id).map_or("", |t| t.title.as_str());
                println!("{}. {:.4} {} {}", rank + 1, hit.score, hit.doc_id, title);
            }
            Ok(())
        }
        Command::Ingest {
            input,
            out,
            augmenters,
            gateway,
        } => {
            let names: Vec<&str> = augmenters.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let gw = if names.contains(&"llm") {
                let options = EngineOptions {
                    gateway: gateway.config()?,
                    canned: gateway.canned,
                    templates: gateway.templates,
                    ..EngineOptions::default()
                };
                Some(Arc::new(build_gateway(&options)?))
            } else {
                None
            };
            let augmenters = taskbot_ingest::augmenters_by_name(&names, gw).map_err(anyhow::Error::msg)?;
            let docs =
                taskbot_ingest::load_documents(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = taskbot_ingest::run_pipeline(&docs, &augmenters, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::EvalNdp {
            dataset,
            backend,
            gateway,
        } => {
            let decider: Box<dyn DecisionBackend> = match backend {
                DeciderChoice::Pattern => Box::new(PatternBackend),
                DeciderChoice::Remote => {
                    let options = EngineOptions {
                        gateway: gateway.config()?,
                        canned: gateway.canned,
                        templates: gateway.templates,
                        ..EngineOptions::default()
                    };
                    Box::new(RemoteBackend::new(Arc::new(build_gateway(&options)?)))
                }
            };
            let file = File::open(&dataset).with_context(|| format!("opening {}", dataset.display()))?;
            let report = evaluate_lines(BufReader::new(file), decider.as_ref());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::BuildIndex { corpus, queries } => {
            let tasks = read_corpus(&corpus.join(taskbot_core::orchestrator::TASKS_FILE))?;
            let index = build_index(&tasks)?;
            index.save(&corpus.join(INDEX_FILE))?;
            println!("indexed {} tasks", tasks.len());
            if let Some(path) = queries {
                let log: Vec<String> = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?
                    .lines()
                    .map(str::to_string)
                    .collect();
                let trajectories = build_trajectories(&log, &index);
                let mut out = File::create(corpus.join(TRAJECTORIES_FILE))?;
                write_trajectories(&mut out, &trajectories)?;
                println!("wrote {} trajectories", trajectories.len());
            }
            Ok(())
        }
        Command::Script {
            script,
            corpus,
            logs,
            session_id,
            gateway,
            fixed_clock_ms,
        } => {
            let options = EngineOptions {
                corpus,
                logs: Some(logs),
                gateway: gateway.config()?,
                canned: gateway.canned,
                templates: gateway.templates,
                fixed_clock_ms,
                ..EngineOptions::default()
            };
            let engine = build_engine(&options)?;
            let mut session = engine.create_session(&session_id)?;
            let file = File::open(&script).with_context(|| format!("opening {}", script.display()))?;
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let output = engine.handle_turn(&mut session, &line);
                if let Some(err) = output.persist_error {
                    bail!("turn not persisted: {err}");
                }
            }
            let records = engine.store().load(&session_id)?.unwrap_or_default();
            print!("{}", format_transcript(&records));
            Ok(())
        }
        Command::FallbackRate {
            utterances,
            corpus,
            decider,
            gateway,
        } => {
            let options = EngineOptions {
                corpus,
                gateway: gateway.config()?,
                canned: gateway.canned,
                templates: gateway.templates,
                decider,
                ..EngineOptions::default()
            };
            let engine = build_engine(&options)?;
            let text =
                std::fs::read_to_string(&utterances).with_context(|| format!("reading {}", utterances.display()))?;
            let (mut total, mut fallbacks) = (0usize, 0usize);
            for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                let mut session = engine.create_session(&format!("rate-{i}"))?;
                total += 1;
                if engine.handle_turn(&mut session, line).policy == "fallback" {
                    fallbacks += 1;
                }
            }
            let rate = if total == 0 {
                0.0
            } else {
                fallbacks as f64 / total as f64
            };
            let report = serde_json::json!({ "total": total, "fallback": fallbacks, "rate": rate });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn serve(engine: taskbot_core::orchestrator::Engine, addr: SocketAddr) -> anyhow::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let docs = engine.catalog().len();
        let state = AppState::new(engine);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        tracing::info!(corpus_docs = docs, "serving");
        println!("listening on http://{local}");
        io::stdout().flush()?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
