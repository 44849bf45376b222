//! Post-parse passes that enrich a TaskGraph.

use std::sync::{Arc, LazyLock};

use scraper::{Html, Selector};
use taskbot_core::gateway::Gateway;
use taskbot_core::taskgraph::{MediaKind, MediaRef, TaskDomain, TaskGraph};

use crate::text::sentences;
use crate::{hero_image, RawDocument};

pub trait Augmenter: Send + Sync {
    fn id(&self) -> &str;
    /// `None` applies to every domain.
    fn applies_to(&self) -> Option<TaskDomain> {
        None
    }
    fn apply(&self, graph: TaskGraph, doc: &RawDocument, diagnostics: &mut Vec<String>) -> TaskGraph;
}

/// Speech-friendly step text: the first two sentences behind a connective.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpokenAugmenter;

const MIDDLE_CONNECTIVES: [&str; 2] = ["Next,", "Then,"];

fn lower_first(sentence: &str) -> String {
    let first_word = sentence.split_whitespace().next().unwrap_or("");
    let keep = first_word == "I" || first_word.starts_with("I'") || first_word.chars().skip(1).any(char::is_uppercase);
    let mut chars = sentence.chars();
    match chars.next() {
        Some(c) if !keep => c.to_lowercase().chain(chars).collect(),
        _ => sentence.to_string(),
    }
}

pub fn augment_spoken(mut graph: TaskGraph) -> TaskGraph {
    let last = graph.steps.len().saturating_sub(1);
    for (i, step) in graph.steps.iter_mut().enumerate() {
        if step.spoken_text.is_some() {
            continue;
        }
        let connective = if i == 0 {
            "First,"
        } else if i == last {
            "Finally,"
        } else {
            MIDDLE_CONNECTIVES[(i - 1) % MIDDLE_CONNECTIVES.len()]
        };
        let head = sentences(&step.text).into_iter().take(2).collect::<Vec<_>>().join(" ");
        step.spoken_text = Some(format!("{connective} {}", lower_first(&head)));
    }
    graph
}

impl Augmenter for SpokenAugmenter {
    fn id(&self) -> &str {
        "spoken"
    }

    fn apply(&self, graph: TaskGraph, _doc: &RawDocument, _diagnostics: &mut Vec<String>) -> TaskGraph {
        augment_spoken(graph)
    }
}

static IMG: LazyLock<Selector> = LazyLock::new(|| Selector::parse("img[src]").unwrap());
static VIDEO: LazyLock<Selector> = LazyLock::new(|| Selector::parse("video[src], video source[src]").unwrap());
static IFRAME: LazyLock<Selector> = LazyLock::new(|| Selector::parse("iframe[src]").unwrap());

/// Attaches the page's own images and videos: a hero image when missing,
/// remaining images to steps without media in order, and the first video
/// to the first step at offset zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct MediaAugmenter;

pub fn augment_media(mut graph: TaskGraph, doc: &RawDocument) -> TaskGraph {
    let html = Html::parse_document(&doc.html);
    if graph.hero_image.is_none() {
        graph.hero_image = hero_image(&html);
    }
    let hero_url = graph.hero_image.as_ref().map(|m| m.url.clone());
    let mut images = html
        .select(&IMG)
        .filter_map(|img| {
            let src = img.attr("src")?.trim();
            let mut media = MediaRef::image(src);
            media.caption = img
                .attr("alt")
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::to_string);
            Some(media)
        })
        .filter(|m| !m.url.is_empty() && Some(&m.url) != hero_url.as_ref());
    for step in graph.steps.iter_mut().filter(|s| s.media.is_empty()) {
        match images.next() {
            Some(image) => step.media.push(image),
            None => break,
        }
    }
    let embedded = html
        .select(&IFRAME)
        .filter_map(|f| f.attr("src"))
        .filter(|src| src.contains("youtube") || src.contains("vimeo"));
    let video = html
        .select(&VIDEO)
        .filter_map(|v| v.attr("src"))
        .chain(embedded)
        .map(str::trim)
        .find(|src| !src.is_empty());
    if let (Some(url), Some(first)) = (video, graph.steps.first_mut()) {
        if !first.media.iter().any(|m| m.kind == MediaKind::Video) {
            first.media.push(MediaRef {
                kind: MediaKind::Video,
                url: url.to_string(),
                caption: None,
                step_offset_seconds: Some(0),
            });
        }
    }
    graph
}

impl Augmenter for MediaAugmenter {
    fn id(&self) -> &str {
        "media"
    }

    fn apply(&self, graph: TaskGraph, doc: &RawDocument, _diagnostics: &mut Vec<String>) -> TaskGraph {
        augment_media(graph, doc)
    }
}

/// Fills step details from the `step_rewrite` template. Step text is
/// never touched; a failed call leaves the step as it was.
pub struct LlmRewriteAugmenter {
    gateway: Arc<Gateway>,
}

impl LlmRewriteAugmenter {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self { gateway }
    }
}

pub fn augment_llm_rewrite(mut graph: TaskGraph, gateway: &Gateway, diagnostics: &mut Vec<String>) -> TaskGraph {
    let title = graph.title.clone();
    for step in graph.steps.iter_mut() {
        let request = gateway
            .request("step_rewrite")
            .slot("task_title", title.as_str())
            .slot("step_text", step.text.as_str());
        match gateway.generate(&request) {
            Ok(response) if !response.text.trim().is_empty() => {
                step.details = Some(response.text.trim().to_string());
            }
            Ok(_) => diagnostics.push(format!("{} {}: empty rewrite", graph.id, step.id)),
            Err(err) => diagnostics.push(format!("{} {}: rewrite failed: {err}", graph.id, step.id)),
        }
    }
    graph
}

impl Augmenter for LlmRewriteAugmenter {
    fn id(&self) -> &str {
        "llm"
    }

    fn apply(&self, graph: TaskGraph, _doc: &RawDocument, diagnostics: &mut Vec<String>) -> TaskGraph {
        augment_llm_rewrite(graph, &self.gateway, diagnostics)
    }
}
