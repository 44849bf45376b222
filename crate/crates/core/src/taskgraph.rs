//! TaskGraph: an executable real-world task and its live mutations.
//!
//! Steps form a linear sequence; details and media hang off each step.
//! Graphs are values. Every mutation returns a new graph and, where a
//! cursor is involved, the cursor re-pointed into the new graph.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskDomain {
    Cooking,
    Diy,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Video,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediaRef {
    pub kind: MediaKind,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    /// Offset into a video where this step starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_offset_seconds: Option<u32>,
}

impl MediaRef {
    pub fn image(url: impl Into<String>) -> Self {
        Self {
            kind: MediaKind::Image,
            url: url.into(),
            caption: None,
            step_offset_seconds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepNode {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spoken_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub media: Vec<MediaRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<u32>,
}

impl StepNode {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            spoken_text: None,
            details: None,
            media: Vec::new(),
            duration_seconds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[serde(default)]
    pub optional_flag: bool,
}

impl Requirement {
    pub fn new(name: impl Into<String>, quantity: Option<&str>) -> Self {
        Self {
            name: name.into(),
            quantity: quantity.map(str::to_string),
            optional_flag: false,
        }
    }

    /// "200 g butter" style display line.
    pub fn display_line(&self) -> String {
        match &self.quantity {
            Some(q) if !q.is_empty() => format!("{q} {}", self.name),
            _ => self.name.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub text: String,
    pub source_url: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub id: String,
    pub title: String,
    pub domain: TaskDomain,
    pub source_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    /// Whole-task duration, when the source states one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_duration_seconds: Option<u32>,
    #[serde(default)]
    pub requirements: Vec<Requirement>,
    pub steps: Vec<StepNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knowledge: Vec<KnowledgeChunk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hero_image: Option<MediaRef>,
}

/// Execution position inside a task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCursor {
    pub task_id: String,
    pub index: usize,
}

impl TaskCursor {
    pub fn start(graph: &TaskGraph) -> Self {
        Self {
            task_id: graph.id.clone(),
            index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("step id {0:?} already exists")]
    DuplicateStepId(String),
    #[error("index {index} out of range for {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cannot remove the only step of a task")]
    LastStep,
    #[error("no requirement named {0:?}")]
    RequirementNotFound(String),
    #[error("cursor belongs to task {cursor}, not {graph}")]
    CursorMismatch { cursor: String, graph: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {message}")]
    Decode { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> GraphError {
    GraphError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

impl TaskGraph {
    /// Checks every graph invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.id.trim().is_empty() {
            return Err(invalid("id", "must be non-empty"));
        }
        if self.title.trim().is_empty() {
            return Err(invalid("title", "must be non-empty"));
        }
        if let Some(rating) = self.rating {
            if !(0.0..=5.0).contains(&rating) {
                return Err(invalid("rating", format!("{rating} not in [0, 5]")));
            }
        }
        if self.steps.is_empty() {
            return Err(invalid("steps", "a task needs at least one step"));
        }
        let mut seen = HashSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            validate_step(step, &format!("steps[{i}]"))?;
            if !seen.insert(step.id.as_str()) {
                return Err(invalid(
                    format!("steps[{i}].id"),
                    format!("duplicate step id {:?}", step.id),
                ));
            }
        }
        for (i, req) in self.requirements.iter().enumerate() {
            if req.name.trim().is_empty() {
                return Err(invalid(format!("requirements[{i}].name"), "must be non-empty"));
            }
        }
        for (i, chunk) in self.knowledge.iter().enumerate() {
            if chunk.text.trim().is_empty() {
                return Err(invalid(format!("knowledge[{i}].text"), "must be non-empty"));
            }
        }
        if let Some(media) = &self.hero_image {
            validate_media(media, "hero_image")?;
        }
        Ok(())
    }

    pub fn step(&self, index: usize) -> Option<&StepNode> {
        self.steps.get(index)
    }

    pub fn position_of(&self, step_id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.id == step_id)
    }

    /// A step id not yet used in this graph, `s<n>` style.
    pub fn fresh_step_id(&self) -> String {
        (self.steps.len() + 1..)
            .map(|n| format!("s{n}"))
            .find(|id| self.position_of(id).is_none())
            .unwrap_or_default()
    }
}

fn validate_step(step: &StepNode, path: &str) -> Result<(), GraphError> {
    if step.id.trim().is_empty() {
        return Err(invalid(format!("{path}.id"), "must be non-empty"));
    }
    if step.text.trim().is_empty() {
        return Err(invalid(format!("{path}.text"), "must be non-empty"));
    }
    if step.duration_seconds == Some(0) {
        return Err(invalid(format!("{path}.duration_seconds"), "must be positive"));
    }
    for (i, media) in step.media.iter().enumerate() {
        validate_media(media, &format!("{path}.media[{i}]"))?;
    }
    Ok(())
}

fn validate_media(media: &MediaRef, path: &str) -> Result<(), GraphError> {
    if media.url.trim().is_empty() {
        return Err(invalid(format!("{path}.url"), "must be non-empty"));
    }
    Ok(())
}

fn check_cursor(graph: &TaskGraph, cursor: Option<&TaskCursor>) -> Result<(), GraphError> {
    match cursor {
        Some(c) if c.task_id != graph.id => Err(GraphError::CursorMismatch {
            cursor: c.task_id.clone(),
            graph: graph.id.clone(),
        }),
        Some(c) if c.index >= graph.steps.len() => Err(GraphError::IndexOutOfRange {
            index: c.index,
            len: graph.steps.len(),
        }),
        _ => Ok(()),
    }
}

/// Inserts `step` after `after_index`; `None` prepends.
pub fn append_step(graph: &TaskGraph, after_index: Option<usize>, step: StepNode) -> Result<TaskGraph, GraphError> {
    let len = graph.steps.len();
    let at = match after_index {
        None => 0,
        Some(i) if i < len => i + 1,
        Some(i) => return Err(GraphError::IndexOutOfRange { index: i, len }),
    };
    if graph.position_of(&step.id).is_some() {
        return Err(GraphError::DuplicateStepId(step.id));
    }
    validate_step(&step, "step")?;
    let mut next = graph.clone();
    next.steps.insert(at, step);
    Ok(next)
}

pub fn remove_step(
    graph: &TaskGraph,
    index: usize,
    cursor: Option<&TaskCursor>,
) -> Result<(TaskGraph, Option<TaskCursor>), GraphError> {
    let len = graph.steps.len();
    if index >= len {
        return Err(GraphError::IndexOutOfRange { index, len });
    }
    if len < 2 {
        return Err(GraphError::LastStep);
    }
    check_cursor(graph, cursor)?;
    let mut next = graph.clone();
    next.steps.remove(index);
    let cursor = cursor.map(|c| {
        let new_index = if c.index > index {
            c.index - 1
        } else {
            c.index.min(len - 2)
        };
        TaskCursor {
            task_id: c.task_id.clone(),
            index: new_index,
        }
    });
    Ok((next, cursor))
}

/// Moves a step with remove-then-insert semantics; the cursor follows the
/// step it pointed at.
pub fn reschedule_step(
    graph: &TaskGraph,
    from_index: usize,
    to_index: usize,
    cursor: Option<&TaskCursor>,
) -> Result<(TaskGraph, Option<TaskCursor>), GraphError> {
    let len = graph.steps.len();
    for index in [from_index, to_index] {
        if index >= len {
            return Err(GraphError::IndexOutOfRange { index, len });
        }
    }
    check_cursor(graph, cursor)?;
    let mut next = graph.clone();
    let step = next.steps.remove(from_index);
    next.steps.insert(to_index, step);
    let cursor = cursor.map(|c| {
        let i = c.index;
        let new_index = if i == from_index {
            to_index
        } else if from_index < i && i <= to_index {
            i - 1
        } else if to_index <= i && i < from_index {
            i + 1
        } else {
            i
        };
        TaskCursor {
            task_id: c.task_id.clone(),
            index: new_index,
        }
    });
    Ok((next, cursor))
}

/// Replaces the requirement whose name matches `old_name` case-insensitively.
/// Step texts are left alone.
pub fn substitute_requirement(
    graph: &TaskGraph,
    old_name: &str,
    replacement: Requirement,
) -> Result<TaskGraph, GraphError> {
    let wanted = old_name.trim().to_lowercase();
    let position = graph
        .requirements
        .iter()
        .position(|r| r.name.trim().to_lowercase() == wanted)
        .ok_or_else(|| GraphError::RequirementNotFound(old_name.to_string()))?;
    if replacement.name.trim().is_empty() {
        return Err(invalid("replacement.name", "must be non-empty"));
    }
    let mut next = graph.clone();
    next.requirements[position] = replacement;
    Ok(next)
}

pub fn serialize_graph(graph: &TaskGraph) -> Vec<u8> {
    // Struct fields serialize in declaration order, so output is stable.
    serde_json::to_vec(graph).expect("task graphs always serialize")
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<TaskGraph, GraphError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let graph: TaskGraph = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        GraphError::Decode {
            path: if path == "." { "$".to_string() } else { path },
            message: err.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|err| GraphError::Decode {
        path: "$".into(),
        message: err.to_string(),
    })?;
    graph.validate()?;
    Ok(graph)
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: GraphError,
    },
}

/// Reads a `tasks.jsonl` corpus, one graph per line. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<TaskGraph>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let graph = deserialize_graph(line.as_bytes()).map_err(|source| CorpusError::Line { line: i + 1, source })?;
        graphs.push(graph);
    }
    Ok(graphs)
}

pub fn write_corpus<'a>(out: &mut impl Write, graphs: impl IntoIterator<Item = &'a TaskGraph>) -> io::Result<()> {
    for graph in graphs {
        out.write_all(&serialize_graph(graph))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_of(ids: &[&str]) -> TaskGraph {
        TaskGraph {
            id: "t1".into(),
            title: "Test task".into(),
            domain: TaskDomain::Other,
            source_url: "https://example.org/t1".into(),
            author: None,
            tags: vec![],
            rating: None,
            total_duration_seconds: None,
            requirements: vec![],
            steps: ids.iter().map(|id| StepNode::new(*id, format!("do {id}"))).collect(),
            knowledge: vec![],
            hero_image: None,
        }
    }

    fn ids(g: &TaskGraph) -> Vec<&str> {
        g.steps.iter().map(|s| s.id.as_str()).collect()
    }

    fn cursor(index: usize) -> TaskCursor {
        TaskCursor {
            task_id: "t1".into(),
            index,
        }
    }

    #[test]
    fn append_positions() {
        let g = graph_of(&["a", "b"]);
        let c = StepNode::new("c", "do c");
        assert_eq!(ids(&append_step(&g, Some(0), c.clone()).unwrap()), ["a", "c", "b"]);
        assert_eq!(ids(&append_step(&g, Some(1), c.clone()).unwrap()), ["a", "b", "c"]);
        let single = graph_of(&["a"]);
        assert_eq!(ids(&append_step(&single, None, c.clone()).unwrap()), ["c", "a"]);
        assert_eq!(
            append_step(&g, Some(2), c),
            Err(GraphError::IndexOutOfRange { index: 2, len: 2 })
        );
        assert_eq!(
            append_step(&g, Some(0), StepNode::new("a", "again")),
            Err(GraphError::DuplicateStepId("a".into()))
        );
    }

    #[test]
    fn remove_examples() {
        let (g, c) = remove_step(&graph_of(&["a", "b", "c"]), 1, Some(&cursor(2))).unwrap();
        assert_eq!(ids(&g), ["a", "c"]);
        assert_eq!(c.unwrap().index, 1);
        let (g, c) = remove_step(&graph_of(&["a", "b"]), 0, Some(&cursor(0))).unwrap();
        assert_eq!(ids(&g), ["b"]);
        assert_eq!(c.unwrap().index, 0);
        assert_eq!(remove_step(&graph_of(&["a"]), 0, None), Err(GraphError::LastStep));
        assert!(matches!(
            remove_step(&graph_of(&["a", "b"]), 5, None),
            Err(GraphError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn reschedule_examples() {
        let (g, _) = reschedule_step(&graph_of(&["a", "b", "c"]), 0, 2, None).unwrap();
        assert_eq!(ids(&g), ["b", "c", "a"]);
        let base = graph_of(&["a", "b", "c"]);
        let (same, c) = reschedule_step(&base, 1, 1, Some(&cursor(1))).unwrap();
        assert_eq!(same, base);
        assert_eq!(c.unwrap().index, 1);
        let (g, c) = reschedule_step(&base, 2, 0, Some(&cursor(2))).unwrap();
        assert_eq!(ids(&g), ["c", "a", "b"]);
        assert_eq!(c.unwrap().index, 0);
    }

    // Re-indexing oracle: track the step under the cursor by label and look
    // it up again after the list operation.
    fn oracle_remove(labels: &[String], index: usize, cur: usize) -> (Vec<String>, usize) {
        let mut out = labels.to_vec();
        let removed = out.remove(index);
        let target = &labels[cur];
        let new_cursor = if *target == removed {
            cur.min(out.len() - 1)
        } else {
            out.iter().position(|l| l == target).unwrap()
        };
        (out, new_cursor)
    }

    fn oracle_reschedule(labels: &[String], from: usize, to: usize, cur: usize) -> (Vec<String>, usize) {
        let mut out = labels.to_vec();
        let moved = out.remove(from);
        out.insert(to, moved);
        let target = &labels[cur];
        (out.clone(), out.iter().position(|l| l == target).unwrap())
    }

    #[test]
    fn remove_matches_brute_force_oracle_for_small_graphs() {
        for len in 1..=4usize {
            let labels: Vec<String> = (0..len).map(|i| format!("s{i}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let g = graph_of(&refs);
            for index in 0..len {
                for cur in 0..len {
                    let result = remove_step(&g, index, Some(&cursor(cur)));
                    if len == 1 {
                        assert_eq!(result, Err(GraphError::LastStep));
                        continue;
                    }
                    let (ng, nc) = result.unwrap();
                    let (expected, expected_cursor) = oracle_remove(&labels, index, cur);
                    assert_eq!(ids(&ng), expected);
                    assert_eq!(nc.unwrap().index, expected_cursor, "len {len} rm {index} cur {cur}");
                }
            }
        }
    }

    #[test]
    fn reschedule_matches_permutation_oracle_for_small_graphs() {
        for len in 1..=4usize {
            let labels: Vec<String> = (0..len).map(|i| format!("s{i}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let g = graph_of(&refs);
            for from in 0..len {
                for to in 0..len {
                    for cur in 0..len {
                        let (ng, nc) = reschedule_step(&g, from, to, Some(&cursor(cur))).unwrap();
                        let (expected, expected_cursor) = oracle_reschedule(&labels, from, to, cur);
                        assert_eq!(ids(&ng), expected);
                        assert_eq!(nc.unwrap().index, expected_cursor);
                    }
                }
            }
        }
    }

    #[test]
    fn substitution() {
        let mut g = graph_of(&["a"]);
        g.requirements = vec![Requirement::new("Butter", Some("200g"))];
        let out = substitute_requirement(&g, "butter", Requirement::new("margarine", Some("200g"))).unwrap();
        assert_eq!(out.requirements, vec![Requirement::new("margarine", Some("200g"))]);
        assert_eq!(out.steps, g.steps);
        assert_eq!(
            substitute_requirement(&g, "eggs", Requirement::new("tofu", None)),
            Err(GraphError::RequirementNotFound("eggs".into()))
        );
    }

    #[test]
    fn cursor_for_other_task_is_rejected() {
        let other = TaskCursor {
            task_id: "elsewhere".into(),
            index: 0,
        };
        assert!(matches!(
            remove_step(&graph_of(&["a", "b"]), 0, Some(&other)),
            Err(GraphError::CursorMismatch { .. })
        ));
    }

    #[test]
    fn decode_errors_name_the_field() {
        let missing_title = br#"{"id":"x","domain":"diy","source_url":"u","steps":[{"id":"s1","text":"go"}]}"#;
        let err = deserialize_graph(missing_title).unwrap_err();
        assert!(err.to_string().contains("title"), "{err}");

        let bad_step =
            br#"{"id":"x","title":"T","domain":"diy","source_url":"u","steps":[{"id":"s1","text":"go"},{"id":"s2"}]}"#;
        let err = deserialize_graph(bad_step).unwrap_err();
        match err {
            GraphError::Decode { path, message } => {
                assert_eq!(path, "steps[1]");
                assert!(message.contains("text"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let dup = br#"{"id":"x","title":"T","domain":"diy","source_url":"u","steps":[{"id":"s1","text":"a"},{"id":"s1","text":"b"}]}"#;
        assert!(matches!(
            deserialize_graph(dup),
            Err(GraphError::Invalid { path, .. }) if path == "steps[1].id"
        ));
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let doc = br#"{"id":"x","title":"T","domain":"cooking","source_url":"u","future":{"a":1},"steps":[{"id":"s1","text":"go","colour":"red"}]}"#;
        let g = deserialize_graph(doc).unwrap();
        assert_eq!(g.title, "T");
        assert_eq!(g.steps.len(), 1);
    }

    #[test]
    fn serialization_is_stable() {
        let mut g = graph_of(&["a", "b"]);
        g.rating = Some(4.3);
        g.tags = vec!["dinner".into()];
        let bytes = serialize_graph(&g);
        assert_eq!(bytes, serialize_graph(&deserialize_graph(&bytes).unwrap()));
        let text = String::from_utf8(bytes).unwrap();
        assert!(
            text.starts_with(r#"{"id":"t1","title":"Test task","domain":"other""#),
            "{text}"
        );
    }
}
