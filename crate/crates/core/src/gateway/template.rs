use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::GatewayError;

/// A prompt body with `{name}` placeholders. Any other brace is literal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    body: String,
    required_slots: BTreeSet<String>,
}

#[derive(Debug, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits a body into literal runs and placeholder names.
fn pieces(body: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while let Some(offset) = body[i..].find('{') {
        let open = i + offset;
        let rest = &body[open + 1..];
        let name_len = match rest.chars().next() {
            Some(c) if is_ident_start(c) => rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len()),
            _ => 0,
        };
        if name_len > 0 && rest[name_len..].starts_with('}') {
            if literal_start < open {
                out.push(Piece::Text(&body[literal_start..open]));
            }
            out.push(Piece::Slot(&rest[..name_len]));
            i = open + name_len + 2;
            literal_start = i;
        } else {
            i = open + 1;
        }
    }
    if literal_start < body.len() {
        out.push(Piece::Text(&body[literal_start..]));
    }
    out
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_slots = pieces(&body)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(name) => Some(name.to_string()),
                Piece::Text(_) => None,
            })
            .collect();
        Self {
            id: id.into(),
            body,
            required_slots,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_slots(&self) -> &BTreeSet<String> {
        &self.required_slots
    }

    /// Total length of all `{name}` markers in the body.
    pub fn marker_len(&self) -> usize {
        pieces(&self.body)
            .iter()
            .map(|p| match p {
                Piece::Slot(name) => name.len() + 2,
                Piece::Text(_) => 0,
            })
            .sum()
    }

    /// Substitutes every placeholder in a single pass; slot values are
    /// inserted literally and never re-expanded.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        if let Some(missing) = self.required_slots.iter().find(|s| !slots.contains_key(*s)) {
            return Err(GatewayError::MissingSlot(missing.clone()));
        }
        let mut out = String::with_capacity(self.body.len());
        for piece in pieces(&self.body) {
            match piece {
                Piece::Text(text) => out.push_str(text),
                Piece::Slot(name) => out.push_str(&slots[name]),
            }
        }
        Ok(out)
    }
}

pub fn render_prompt(template: &PromptTemplate, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
    template.render(slots)
}

/// Template ids shipped with the crate.
pub const SHIPPED_TEMPLATES: [&str; 6] = ["qa", "fallback", "chitchat", "substitute", "step_rewrite", "ndp"];

#[derive(Clone, Debug, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let mut registry = Self::default();
        for (id, body) in [
            ("qa", include_str!("../../config/templates/qa.txt")),
            ("fallback", include_str!("../../config/templates/fallback.txt")),
            ("chitchat", include_str!("../../config/templates/chitchat.txt")),
            ("substitute", include_str!("../../config/templates/substitute.txt")),
            ("step_rewrite", include_str!("../../config/templates/step_rewrite.txt")),
            ("ndp", include_str!("../../config/templates/ndp.txt")),
        ] {
            registry.insert(PromptTemplate::new(id, body));
        }
        registry
    }

    /// Built-in templates overridden by every `<id>.txt` in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, GatewayError> {
        let mut registry = Self::builtin();
        let entries = fs::read_dir(dir).map_err(|e| GatewayError::Config(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body =
                fs::read_to_string(&path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
            registry.insert(PromptTemplate::new(id, body));
        }
        Ok(registry)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}
