//! schema.org Recipe and HowTo extraction from JSON-LD script blocks.

use std::sync::LazyLock;

use scraper::{Html, Selector};
use serde_json::Value;
use taskbot_core::taskgraph::{MediaKind, MediaRef, Requirement, StepNode, TaskDomain, TaskGraph};

use crate::text::{collapse, iso_duration_seconds, split_quantity, task_id};
use crate::{hero_image, page_knowledge, page_tags, Parsed, RawDocument};

static LD_JSON: LazyLock<Selector> =
    LazyLock::new(|| Selector::parse(r#"script[type="application/ld+json"]"#).unwrap());

fn types(node: &Value) -> Vec<&str> {
    match node.get("@type") {
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(items)) => items.iter().filter_map(Value::as_str).collect(),
        _ => Vec::new(),
    }
}

fn has_type(node: &Value, wanted: &str) -> bool {
    types(node).iter().any(|t| t.rsplit('/').next() == Some(wanted))
}

/// Flattens top-level arrays and `@graph` containers.
fn flatten<'a>(value: &'a Value, out: &mut Vec<&'a Value>) {
    match value {
        Value::Array(items) => items.iter().for_each(|v| flatten(v, out)),
        Value::Object(map) => {
            if let Some(graph) = map.get("@graph") {
                flatten(graph, out);
            }
            if map.contains_key("@type") {
                out.push(value);
            }
        }
        _ => {}
    }
}

fn string_of(value: &Value) -> Option<String> {
    let s = match value {
        Value::String(s) => collapse(s),
        Value::Number(n) => n.to_string(),
        Value::Object(map) => map.get("name").or_else(|| map.get("text")).and_then(string_of)?,
        Value::Array(items) => items.iter().find_map(string_of)?,
        _ => return None,
    };
    (!s.is_empty()).then_some(s)
}

fn url_of(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Object(map) => map.get("url").or_else(|| map.get("contentUrl")).and_then(url_of),
        Value::Array(items) => items.iter().find_map(url_of),
        _ => None,
    }
}

fn image_of(value: Option<&Value>) -> Option<MediaRef> {
    let value = value?;
    let mut media = MediaRef::image(url_of(value)?);
    media.caption = value.get("caption").and_then(string_of);
    Some(media)
}

fn video_of(value: Option<&Value>) -> Option<MediaRef> {
    let value = value?;
    let url = value
        .get("contentUrl")
        .or_else(|| value.get("embedUrl"))
        .and_then(url_of)
        .or_else(|| url_of(value))?;
    let offset = value.get("startOffset").and_then(|v| match v {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    });
    Some(MediaRef {
        kind: MediaKind::Video,
        url,
        caption: value.get("name").and_then(string_of),
        step_offset_seconds: offset,
    })
}

fn rating_of(node: &Value) -> Option<f64> {
    let value = node.get("aggregateRating")?.get("ratingValue")?;
    let rating = match value {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse().ok()?,
        _ => return None,
    };
    (rating.is_finite()).then(|| rating.clamp(0.0, 5.0))
}

/// Collects step texts and media, descending into HowToSection lists.
fn collect_steps(value: &Value, out: &mut Vec<(String, Vec<MediaRef>)>) {
    match value {
        Value::String(s) => {
            // a single string holds one instruction per line
            for line in s.lines().map(collapse).filter(|l| !l.is_empty()) {
                out.push((line, Vec::new()));
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_steps(v, out)),
        Value::Object(map) => {
            if has_type(value, "HowToSection") {
                if let Some(items) = map.get("itemListElement") {
                    collect_steps(items, out);
                }
                return;
            }
            let text = map.get("text").or_else(|| map.get("name")).and_then(string_of);
            if let Some(text) = text {
                let media = image_of(map.get("image"))
                    .into_iter()
                    .chain(video_of(map.get("video")))
                    .collect();
                out.push((text, media));
            }
        }
        _ => {}
    }
}

fn requirements_of(value: Option<&Value>, optional_flag: bool) -> Vec<Requirement> {
    let items: Vec<&Value> = match value {
        Some(Value::Array(items)) => items.iter().collect(),
        Some(v) => vec![v],
        None => Vec::new(),
    };
    items
        .into_iter()
        .filter_map(|item| match item {
            Value::String(s) => Some(split_quantity(s)),
            Value::Object(map) => {
                let name = map.get("name").and_then(string_of)?;
                let quantity = map.get("requiredQuantity").and_then(|q| match q {
                    Value::Object(_) => {
                        q.get("value")
                            .and_then(string_of)
                            .map(|v| match q.get("unitText").and_then(string_of) {
                                Some(unit) => format!("{v} {unit}"),
                                None => v,
                            })
                    }
                    other => string_of(other),
                });
                Some(Requirement {
                    name,
                    quantity,
                    optional_flag,
                })
            }
            _ => None,
        })
        .filter(|r| !r.name.trim().is_empty())
        .collect()
}

fn breadcrumb_tags(nodes: &[&Value]) -> Vec<String> {
    let mut tags = Vec::new();
    for node in nodes.iter().filter(|n| has_type(n, "BreadcrumbList")) {
        let Some(Value::Array(items)) = node.get("itemListElement") else {
            continue;
        };
        let mut ordered: Vec<(i64, String)> = items
            .iter()
            .enumerate()
            .filter_map(|(i, item)| {
                let pos = item.get("position").and_then(Value::as_i64).unwrap_or(i as i64);
                let name = item
                    .get("name")
                    .or_else(|| item.get("item").and_then(|it| it.get("name")))
                    .and_then(string_of)?;
                Some((pos, name))
            })
            .collect();
        ordered.sort_by_key(|(pos, _)| *pos);
        tags.extend(
            ordered
                .into_iter()
                .map(|(_, name)| name)
                .filter(|n| !n.eq_ignore_ascii_case("home")),
        );
    }
    tags
}

fn graph_from(
    node: &Value,
    domain: TaskDomain,
    doc: &RawDocument,
    html: &Html,
    tags: Vec<String>,
) -> Result<TaskGraph, String> {
    let title = node
        .get("name")
        .or_else(|| node.get("headline"))
        .and_then(string_of)
        .ok_or("structured data has no name")?;
    let mut raw_steps = Vec::new();
    let (steps_key, requirements) = match domain {
        TaskDomain::Cooking => (
            "recipeInstructions",
            requirements_of(node.get("recipeIngredient"), false),
        ),
        _ => {
            let mut reqs = requirements_of(node.get("supply"), false);
            reqs.extend(requirements_of(node.get("tool"), false));
            ("step", reqs)
        }
    };
    if let Some(v) = node.get(steps_key) {
        collect_steps(v, &mut raw_steps);
    }
    let steps = raw_steps
        .into_iter()
        .enumerate()
        .map(|(i, (text, media))| {
            let mut step = StepNode::new(format!("s{}", i + 1), text);
            step.media = media;
            step
        })
        .collect();
    let mut all_tags = tags;
    for tag in page_tags(html) {
        if !all_tags.contains(&tag) {
            all_tags.push(tag);
        }
    }
    Ok(TaskGraph {
        id: task_id(&title, &doc.url),
        title,
        domain,
        source_url: doc.url.clone(),
        author: node.get("author").and_then(string_of),
        tags: all_tags,
        rating: rating_of(node),
        total_duration_seconds: node
            .get("totalTime")
            .and_then(Value::as_str)
            .and_then(iso_duration_seconds),
        requirements,
        steps,
        knowledge: page_knowledge(html, &doc.url),
        hero_image: image_of(node.get("image")).or_else(|| hero_image(html)),
    })
}

/// Builds a graph from the first Recipe or HowTo block. Blocks that fail
/// to parse add a diagnostic and are skipped.
pub fn parse_structured(doc: &RawDocument) -> Parsed {
    let html = Html::parse_document(&doc.html);
    let mut diagnostics = Vec::new();
    let mut values = Vec::new();
    for (i, script) in html.select(&LD_JSON).enumerate() {
        let raw: String = script.text().collect();
        match serde_json::from_str::<Value>(&raw) {
            Ok(v) => values.push(v),
            Err(e) => diagnostics.push(format!("{}: JSON-LD block {}: {e}", doc.url, i + 1)),
        }
    }
    let mut nodes = Vec::new();
    for v in &values {
        flatten(v, &mut nodes);
    }
    let tags = breadcrumb_tags(&nodes);
    let found = nodes.iter().find_map(|n| {
        if has_type(n, "Recipe") {
            Some((*n, TaskDomain::Cooking))
        } else if has_type(n, "HowTo") {
            Some((*n, TaskDomain::Diy))
        } else {
            None
        }
    });
    let graph = found.and_then(|(node, domain)| match graph_from(node, domain, doc, &html, tags) {
        Ok(g) => Some(g),
        Err(e) => {
            diagnostics.push(format!("{}: {e}", doc.url));
            None
        }
    });
    Parsed { graph, diagnostics }
}
