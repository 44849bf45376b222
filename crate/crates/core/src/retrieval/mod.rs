//! Task and knowledge search.
//!
//! One BM25 mechanism serves two corpora: whole tasks (title-weighted) and
//! knowledge chunks. Vague-query detection and search trajectories sit on
//! top of the task index.

mod index;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use index::{build_index, FieldWeights, Hit, InvertedIndex, Posting, SearchDoc, BM25_B, BM25_K1};
pub use tokenize::{is_stopword, tokenize, STOPWORDS};

use crate::taskgraph::KnowledgeChunk;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed index data: {0}")]
    Format(String),
}

impl RetrievalError {
    fn io(path: &Path, source: io::Error) -> Self {
        RetrievalError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn from_json(err: serde_json::Error) -> Self {
        RetrievalError::Format(err.to_string())
    }
}

/// Share of documents above which a term counts as "very common".
pub const VAGUE_DF_RATIO: f64 = 0.3;

/// A query is vague when it has at most one content token, or when every
/// token is very common in the corpus.
pub fn is_vague(query: &str, index: &InvertedIndex) -> bool {
    let tokens = tokenize(query);
    if tokens.len() <= 1 {
        return true;
    }
    if index.doc_count == 0 {
        return false;
    }
    let n = index.doc_count as f64;
    tokens
        .iter()
        .all(|t| index.document_frequency(t) as f64 / n > VAGUE_DF_RATIO)
}

/// Minimum Dice overlap between a query and a cluster seed
/// (equivalently Jaccard >= 1/3).
pub const TRAJECTORY_SIMILARITY: f64 = 0.5;
const CANDIDATES_PER_QUERY: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub theme_label: String,
    pub member_queries: Vec<String>,
    pub elicitation_prompt: String,
    pub candidate_task_ids: Vec<String>,
}

fn dice(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let shared = a.intersection(b).count() as f64;
    2.0 * shared / (a.len() + b.len()) as f64
}

/// Greedy clustering of a query log into themes. Seeds are taken in input
/// order; each query joins the first cluster whose seed is similar enough.
/// Clusters with fewer than two distinct queries, or with no matching
/// tasks, are dropped.
pub fn build_trajectories(query_log: &[String], index: &InvertedIndex) -> Vec<Trajectory> {
    struct Cluster {
        seed: HashSet<String>,
        members: Vec<String>,
    }

    let mut seen = HashSet::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    for raw in query_log {
        let query = raw.trim();
        if query.is_empty() || !seen.insert(query.to_lowercase()) {
            continue;
        }
        let tokens: HashSet<String> = tokenize(query).into_iter().collect();
        match clusters
            .iter_mut()
            .find(|c| dice(&c.seed, &tokens) >= TRAJECTORY_SIMILARITY)
        {
            Some(cluster) => cluster.members.push(query.to_string()),
            None => clusters.push(Cluster {
                seed: tokens,
                members: vec![query.to_string()],
            }),
        }
    }

    clusters
        .into_iter()
        .filter(|c| c.members.len() >= 2)
        .filter_map(|c| {
            let label = theme_label(&c.members)?;
            let mut candidates: Vec<String> = Vec::new();
            for member in &c.members {
                for hit in index.search(member, CANDIDATES_PER_QUERY) {
                    if !candidates.contains(&hit.doc_id) {
                        candidates.push(hit.doc_id);
                    }
                }
            }
            if candidates.is_empty() {
                return None;
            }
            Some(Trajectory {
                elicitation_prompt: elicitation_prompt(&label, &c.members),
                theme_label: label,
                member_queries: c.members,
                candidate_task_ids: candidates,
            })
        })
        .collect()
}

/// Most frequent content token across members; first seen wins ties.
fn theme_label(members: &[String]) -> Option<String> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for member in members {
        let mut unique = HashSet::new();
        for token in tokenize(member) {
            if !order.contains(&token) {
                order.push(token.clone());
            }
            if unique.insert(token.clone()) {
                *counts.entry(token).or_default() += 1;
            }
        }
    }
    let best = order.iter().map(|t| counts[t]).max()?;
    order.into_iter().find(|t| counts[t] == best)
}

fn elicitation_prompt(label: &str, members: &[String]) -> String {
    let examples: Vec<&str> = members.iter().take(2).map(String::as_str).collect();
    format!(
        "There are lots of {label} ideas. Do you have something particular in mind, like {}?",
        examples.join(" or ")
    )
}

/// The trajectory matching a vague query: its theme label appears in the
/// query, or the query is one of its members.
pub fn match_trajectory<'a>(query: &str, trajectories: &'a [Trajectory]) -> Option<&'a Trajectory> {
    let tokens = tokenize(query);
    let lowered = query.trim().to_lowercase();
    trajectories
        .iter()
        .find(|t| tokens.contains(&t.theme_label) || t.member_queries.iter().any(|m| m.to_lowercase() == lowered))
}

pub fn write_trajectories(out: &mut impl Write, trajectories: &[Trajectory]) -> io::Result<()> {
    for t in trajectories {
        serde_json::to_writer(&mut *out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, RetrievalError> {
    let file = File::open(path).map_err(|e| RetrievalError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| RetrievalError::Format(format!("line {}: {e}", i + 1)))?;
        out.push(t);
    }
    Ok(out)
}

/// BM25 over a set of knowledge chunks.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeIndex {
    chunks: Vec<KnowledgeChunk>,
    index: InvertedIndex,
}

impl KnowledgeIndex {
    pub fn new(chunks: Vec<KnowledgeChunk>) -> Self {
        // zero-padded ids keep the doc-id tie-break in chunk order
        let docs = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| SearchDoc::new(format!("k{i:08}"), "", c.text.clone()));
        let index = InvertedIndex::from_documents(docs).expect("generated ids are unique");
        Self { chunks, index }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn top_k(&self, query: &str, k: usize) -> Vec<&KnowledgeChunk> {
        self.index
            .search(query, k)
            .iter()
            .filter_map(|hit| hit.doc_id[1..].parse::<usize>().ok())
            .filter_map(|i| self.chunks.get(i))
            .collect()
    }
}
