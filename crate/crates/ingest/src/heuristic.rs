//! Fallback extraction from plain HTML structure.

use std::sync::LazyLock;

use regex::Regex;
use scraper::{ElementRef, Html, Selector};
use taskbot_core::taskgraph::{StepNode, TaskDomain, TaskGraph};

use crate::text::{collapse, split_quantity, task_id};
use crate::{hero_image, page_knowledge, page_tags, Parsed, RawDocument};

static H1: LazyLock<Selector> = LazyLock::new(|| Selector::parse("h1").unwrap());
static TITLE: LazyLock<Selector> = LazyLock::new(|| Selector::parse("title").unwrap());
static OL: LazyLock<Selector> = LazyLock::new(|| Selector::parse("ol").unwrap());
static UL: LazyLock<Selector> = LazyLock::new(|| Selector::parse("ul").unwrap());

static REQUIREMENT_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)ingredient|material|supplies|you will need").unwrap());
static COOKING_HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)ingredient").unwrap());

pub const MIN_STEPS: usize = 2;

fn text_of(el: ElementRef<'_>) -> String {
    collapse(&el.text().collect::<String>())
}

fn is_heading(el: &ElementRef<'_>) -> bool {
    matches!(el.value().name(), "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

fn list_items(list: ElementRef<'_>) -> Vec<String> {
    list.child_elements()
        .filter(|c| c.value().name() == "li")
        .map(text_of)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Nearest heading before `el`, searching earlier siblings and then those
/// of each ancestor.
fn preceding_heading(el: ElementRef<'_>) -> Option<String> {
    let mut current = Some(el);
    while let Some(node) = current {
        for sibling in node.prev_siblings().filter_map(ElementRef::wrap) {
            if is_heading(&sibling) {
                return Some(text_of(sibling));
            }
        }
        current = node.parent().and_then(ElementRef::wrap);
    }
    None
}

pub fn parse_heuristic(doc: &RawDocument) -> Parsed {
    let mut diagnostics = Vec::new();
    if doc.html.trim().is_empty() {
        diagnostics.push(format!("{}: empty document", doc.url));
        return Parsed {
            graph: None,
            diagnostics,
        };
    }
    let html = Html::parse_document(&doc.html);

    let title = html
        .select(&H1)
        .map(text_of)
        .find(|t| !t.is_empty())
        .or_else(|| html.select(&TITLE).map(text_of).find(|t| !t.is_empty()));
    let Some(title) = title else {
        diagnostics.push(format!("{}: no title", doc.url));
        return Parsed {
            graph: None,
            diagnostics,
        };
    };

    // longest ordered list; the first one wins ties
    let mut steps_text: Vec<String> = Vec::new();
    for list in html.select(&OL) {
        let items = list_items(list);
        if items.len() > steps_text.len() {
            steps_text = items;
        }
    }
    if steps_text.len() < MIN_STEPS {
        diagnostics.push(format!(
            "{}: {} list steps found, need at least {MIN_STEPS}",
            doc.url,
            steps_text.len()
        ));
        return Parsed {
            graph: None,
            diagnostics,
        };
    }

    let mut requirements = Vec::new();
    let mut domain = TaskDomain::Other;
    for list in html.select(&UL) {
        let Some(heading) = preceding_heading(list) else {
            continue;
        };
        if REQUIREMENT_HEADING.is_match(&heading) {
            if domain == TaskDomain::Other {
                domain = if COOKING_HEADING.is_match(&heading) {
                    TaskDomain::Cooking
                } else {
                    TaskDomain::Diy
                };
            }
            requirements.extend(list_items(list).iter().map(|item| split_quantity(item)));
        }
    }

    let steps = steps_text
        .into_iter()
        .enumerate()
        .map(|(i, text)| StepNode::new(format!("s{}", i + 1), text))
        .collect();
    let graph = TaskGraph {
        id: task_id(&title, &doc.url),
        title,
        domain,
        source_url: doc.url.clone(),
        author: None,
        tags: page_tags(&html),
        rating: None,
        total_duration_seconds: None,
        requirements,
        steps,
        knowledge: page_knowledge(&html, &doc.url),
        hero_image: hero_image(&html),
    };
    Parsed {
        graph: Some(graph),
        diagnostics,
    }
}
