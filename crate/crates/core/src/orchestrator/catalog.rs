use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::retrieval::{build_index, read_trajectories, InvertedIndex, KnowledgeIndex, RetrievalError, Trajectory};
use crate::taskgraph::{read_corpus, CorpusError, KnowledgeChunk, TaskGraph};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("{path}: {message}")]
    Knowledge { path: String, message: String },
}

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const KNOWLEDGE_FILE: &str = "knowledge.jsonl";
pub const INDEX_FILE: &str = "index.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";

/// Everything read-only that turns consult: tasks, their search index,
/// corpus-wide knowledge and search trajectories.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    tasks: BTreeMap<String, TaskGraph>,
    index: InvertedIndex,
    knowledge: KnowledgeIndex,
    trajectories: Vec<Trajectory>,
}

impl Catalog {
    pub fn new(
        tasks: Vec<TaskGraph>,
        knowledge: Vec<KnowledgeChunk>,
        trajectories: Vec<Trajectory>,
    ) -> Result<Self, CatalogError> {
        let index = build_index(&tasks)?;
        Ok(Self::with_index(tasks, index, knowledge, trajectories))
    }

    pub fn with_index(
        tasks: Vec<TaskGraph>,
        index: InvertedIndex,
        knowledge: Vec<KnowledgeChunk>,
        trajectories: Vec<Trajectory>,
    ) -> Self {
        Self {
            tasks: tasks.into_iter().map(|t| (t.id.clone(), t)).collect(),
            index,
            knowledge: KnowledgeIndex::new(knowledge),
            trajectories,
        }
    }

    /// Loads a corpus directory. Only `tasks.jsonl` is required; a saved
    /// `index.json` is used when present, otherwise the index is built.
    pub fn load(dir: &Path) -> Result<Self, CatalogError> {
        let tasks = read_corpus(&dir.join(TASKS_FILE))?;
        let knowledge_path = dir.join(KNOWLEDGE_FILE);
        let knowledge = if knowledge_path.exists() {
            read_knowledge(&knowledge_path)?
        } else {
            Vec::new()
        };
        let trajectories_path = dir.join(TRAJECTORIES_FILE);
        let trajectories = if trajectories_path.exists() {
            read_trajectories(&trajectories_path)?
        } else {
            Vec::new()
        };
        let index_path = dir.join(INDEX_FILE);
        if index_path.exists() {
            let index = InvertedIndex::load(&index_path)?;
            Ok(Self::with_index(tasks, index, knowledge, trajectories))
        } else {
            Self::new(tasks, knowledge, trajectories)
        }
    }

    pub fn task(&self, id: &str) -> Option<&TaskGraph> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskGraph> {
        self.tasks.values()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn knowledge(&self) -> &KnowledgeIndex {
        &self.knowledge
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }
}

pub fn read_knowledge(path: &Path) -> Result<Vec<KnowledgeChunk>, CatalogError> {
    let err = |message: String| CatalogError::Knowledge {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut chunks = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        chunks.push(chunk);
    }
    Ok(chunks)
}
