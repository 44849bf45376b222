//! Offline ingestion: HTML task pages in, TaskGraph corpus artifacts out.
//!
//! Each page goes through the JSON-LD parser, then the heuristic parser,
//! then registered augmenters. Survivors are validated and written as
//! `tasks.jsonl`, `knowledge.jsonl`, `categories.json` and `report.json`.

mod augment;
mod heuristic;
mod structured;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};
use std::time::UNIX_EPOCH;

use rayon::prelude::*;
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use taskbot_core::gateway::Gateway;
use taskbot_core::taskgraph::{write_corpus, KnowledgeChunk, MediaRef, TaskGraph};

pub use augment::{
    augment_llm_rewrite, augment_media, augment_spoken, Augmenter, LlmRewriteAugmenter, MediaAugmenter, SpokenAugmenter,
};
pub use heuristic::{parse_heuristic, MIN_STEPS};
pub use structured::parse_structured;
pub use text::{iso_duration_seconds, split_quantity, task_id};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub url: String,
    pub html: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

impl RawDocument {
    pub fn new(url: impl Into<String>, html: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            html: html.into(),
            fetched_at: 0,
        }
    }
}

/// Parser output: a graph when the page qualified, plus diagnostics.
#[derive(Clone, Debug, Default)]
pub struct Parsed {
    pub graph: Option<TaskGraph>,
    pub diagnostics: Vec<String>,
}

/// Paragraphs longer than this become knowledge chunks.
pub const KNOWLEDGE_MIN_CHARS: usize = 300;

static PARAGRAPH: LazyLock<Selector> = LazyLock::new(|| Selector::parse("p").unwrap());
static ARTICLE_TAG: LazyLock<Selector> = LazyLock::new(|| Selector::parse(r#"meta[property="article:tag"]"#).unwrap());
static OG_IMAGE: LazyLock<Selector> = LazyLock::new(|| Selector::parse(r#"meta[property="og:image"]"#).unwrap());
static FIRST_IMG: LazyLock<Selector> = LazyLock::new(|| Selector::parse("img[src]").unwrap());
static CANONICAL: LazyLock<Selector> = LazyLock::new(|| Selector::parse(r#"link[rel="canonical"]"#).unwrap());

pub(crate) fn page_tags(html: &Html) -> Vec<String> {
    let mut tags: Vec<String> = Vec::new();
    for meta in html.select(&ARTICLE_TAG) {
        if let Some(content) = meta.attr("content").map(text::collapse).filter(|c| !c.is_empty()) {
            if !tags.contains(&content) {
                tags.push(content);
            }
        }
    }
    tags
}

pub(crate) fn page_knowledge(html: &Html, url: &str) -> Vec<KnowledgeChunk> {
    html.select(&PARAGRAPH)
        .map(|p| text::collapse(&p.text().collect::<String>()))
        .filter(|t| t.chars().count() > KNOWLEDGE_MIN_CHARS)
        .map(|text| KnowledgeChunk {
            text,
            source_url: url.to_string(),
        })
        .collect()
}

pub(crate) fn hero_image(html: &Html) -> Option<MediaRef> {
    html.select(&OG_IMAGE)
        .filter_map(|m| m.attr("content"))
        .chain(html.select(&FIRST_IMG).filter_map(|i| i.attr("src")))
        .map(str::trim)
        .find(|u| !u.is_empty())
        .map(MediaRef::image)
}

/// Reads `*.html` / `*.htm` files in name order. The URL is the page's
/// canonical link when it has one, else `file:<name>`.
pub fn load_documents(dir: &Path) -> io::Result<Vec<RawDocument>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "html" || e == "htm"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let html = fs::read_to_string(&path)?;
            let fetched_at = fs::metadata(&path)?
                .modified()
                .ok()
                .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                .map_or(0, |d| d.as_secs());
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let url = Html::parse_document(&html)
                .select(&CANONICAL)
                .filter_map(|l| l.attr("href"))
                .map(str::trim)
                .find(|h| !h.is_empty())
                .map_or_else(|| format!("file:{name}"), str::to_string);
            Ok(RawDocument { url, html, fetched_at })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub read: usize,
    pub parsed_structured: usize,
    pub parsed_heuristic: usize,
    pub skipped: usize,
    pub dropped: usize,
    pub written: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("io error on {path}: {source} (wrote {written:?} before failing)")]
pub struct PipelineError {
    pub path: String,
    #[source]
    pub source: io::Error,
    /// Artifacts completed before the failure; also listed in
    /// `manifest.partial.json` when that could be written.
    pub written: Vec<String>,
}

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const KNOWLEDGE_FILE: &str = "knowledge.jsonl";
pub const CATEGORIES_FILE: &str = "categories.json";
pub const REPORT_FILE: &str = "report.json";
pub const PARTIAL_MANIFEST_FILE: &str = "manifest.partial.json";

/// Builds augmenters from names: `spoken`, `media`, `llm`.
pub fn augmenters_by_name(names: &[&str], gateway: Option<Arc<Gateway>>) -> Result<Vec<Box<dyn Augmenter>>, String> {
    names
        .iter()
        .map(|name| -> Result<Box<dyn Augmenter>, String> {
            match name.trim() {
                "spoken" => Ok(Box::new(SpokenAugmenter)),
                "media" => Ok(Box::new(MediaAugmenter)),
                "llm" => gateway
                    .clone()
                    .map(|gw| Box::new(LlmRewriteAugmenter::new(gw)) as Box<dyn Augmenter>)
                    .ok_or_else(|| "the llm augmenter needs a gateway".to_string()),
                other => Err(format!("unknown augmenter {other:?} (expected spoken, media or llm)")),
            }
        })
        .collect()
}

enum Outcome {
    Structured(TaskGraph),
    Heuristic(TaskGraph),
    Skipped,
}

fn process(doc: &RawDocument, augmenters: &[Box<dyn Augmenter>]) -> (Outcome, Vec<String>) {
    let structured = parse_structured(doc);
    let mut diagnostics = structured.diagnostics;
    let outcome = match structured.graph {
        Some(g) => Outcome::Structured(g),
        None => {
            let heuristic = parse_heuristic(doc);
            diagnostics.extend(heuristic.diagnostics);
            match heuristic.graph {
                Some(g) => Outcome::Heuristic(g),
                None => {
                    diagnostics.push(format!("{}: skipped, no task found", doc.url));
                    Outcome::Skipped
                }
            }
        }
    };
    let outcome = match outcome {
        Outcome::Structured(g) => Outcome::Structured(augment(g, doc, augmenters, &mut diagnostics)),
        Outcome::Heuristic(g) => Outcome::Heuristic(augment(g, doc, augmenters, &mut diagnostics)),
        Outcome::Skipped => Outcome::Skipped,
    };
    (outcome, diagnostics)
}

fn augment(
    mut graph: TaskGraph,
    doc: &RawDocument,
    augmenters: &[Box<dyn Augmenter>],
    diagnostics: &mut Vec<String>,
) -> TaskGraph {
    for augmenter in augmenters {
        if augmenter.applies_to().is_none_or(|d| d == graph.domain) {
            graph = augmenter.apply(graph, doc, diagnostics);
        }
    }
    graph
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| self.fail(&path, source))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn fail(&self, path: &Path, source: io::Error) -> PipelineError {
        let manifest = serde_json::json!({ "complete": false, "written": self.written });
        // best effort: the directory itself may be what failed
        let _ = fs::write(
            self.dir.join(PARTIAL_MANIFEST_FILE),
            serde_json::to_vec_pretty(&manifest).unwrap_or_default(),
        );
        PipelineError {
            path: path.display().to_string(),
            source,
            written: self.written.clone(),
        }
    }
}

/// Parses documents in parallel and writes artifacts sorted by task id.
pub fn run_pipeline(
    docs: &[RawDocument],
    augmenters: &[Box<dyn Augmenter>],
    out_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    let processed: Vec<(Outcome, Vec<String>)> = docs.par_iter().map(|d| process(d, augmenters)).collect();

    let mut report = PipelineReport {
        read: docs.len(),
        ..PipelineReport::default()
    };
    let mut graphs: BTreeMap<String, TaskGraph> = BTreeMap::new();
    for (outcome, diagnostics) in processed {
        report.diagnostics.extend(diagnostics);
        let graph = match outcome {
            Outcome::Structured(g) => {
                report.parsed_structured += 1;
                g
            }
            Outcome::Heuristic(g) => {
                report.parsed_heuristic += 1;
                g
            }
            Outcome::Skipped => {
                report.skipped += 1;
                continue;
            }
        };
        if let Err(err) = graph.validate() {
            report.dropped += 1;
            report.diagnostics.push(format!("{}: dropped, {err}", graph.source_url));
            continue;
        }
        if graphs.contains_key(&graph.id) {
            report.dropped += 1;
            report
                .diagnostics
                .push(format!("{}: dropped, duplicate task id {}", graph.source_url, graph.id));
            continue;
        }
        graphs.insert(graph.id.clone(), graph);
    }
    report.written = graphs.len();

    let mut writer = Writer {
        dir: out_dir,
        written: Vec::new(),
    };
    fs::create_dir_all(out_dir).map_err(|e| writer.fail(out_dir, e))?;

    let mut tasks = Vec::new();
    write_corpus(&mut tasks, graphs.values()).expect("writing to memory");
    writer.write(TASKS_FILE, &tasks)?;

    let mut knowledge = Vec::new();
    for chunk in graphs.values().flat_map(|g| &g.knowledge) {
        knowledge.extend(serde_json::to_vec(chunk).expect("chunks serialize"));
        knowledge.push(b'\n');
    }
    writer.write(KNOWLEDGE_FILE, &knowledge)?;

    let mut categories: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for g in graphs.values() {
        for tag in &g.tags {
            categories.entry(tag.as_str()).or_default().insert(g.id.as_str());
        }
    }
    let mut json = serde_json::to_vec_pretty(&categories).expect("maps serialize");
    json.push(b'\n');
    writer.write(CATEGORIES_FILE, &json)?;

    let mut json = serde_json::to_vec_pretty(&report).expect("reports serialize");
    json.push(b'\n');
    writer.write(REPORT_FILE, &json)?;
    let _ = fs::remove_file(out_dir.join(PARTIAL_MANIFEST_FILE));
    Ok(report)
}
