//! Append-only turn logs, one JSONL file per session.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use super::TurnRecord;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

pub trait TurnStore: Send + Sync {
    fn create(&self, session_id: &str) -> Result<(), StoreError>;
    fn append(&self, session_id: &str, record: &TurnRecord) -> Result<(), StoreError>;
    /// `None` when the session was never created.
    fn load(&self, session_id: &str) -> Result<Option<Vec<TurnRecord>>, StoreError>;
    fn list(&self) -> Result<Vec<String>, StoreError>;
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

/// Writes `<dir>/<session_id>.jsonl`. Each record is a single `write` to a
/// file opened in append mode.
#[derive(Clone, Debug)]
pub struct JsonlStore {
    dir: PathBuf,
}

impl JsonlStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn encode_record(record: &TurnRecord) -> String {
    let mut line = serde_json::to_string(record).expect("turn records serialize");
    line.push('\n');
    line
}

/// Parses a turn log. Blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<TurnRecord>, StoreError> {
    let file = File::open(path).map_err(io_at(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

impl TurnStore for JsonlStore {
    fn create(&self, session_id: &str) -> Result<(), StoreError> {
        check_id(session_id)?;
        let path = self.path_for(session_id);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Exists(session_id.to_string())),
            Err(e) => Err(io_at(&path)(e)),
        }
    }

    fn append(&self, session_id: &str, record: &TurnRecord) -> Result<(), StoreError> {
        check_id(session_id)?;
        let path = self.path_for(session_id);
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_at(&path))?;
        file.write_all(encode_record(record).as_bytes()).map_err(io_at(&path))
    }

    fn load(&self, session_id: &str) -> Result<Option<Vec<TurnRecord>>, StoreError> {
        check_id(session_id)?;
        let path = self.path_for(session_id);
        if !path.exists() {
            return Ok(None);
        }
        read_log(&path).map(Some)
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        let entries = fs::read_dir(&self.dir).map_err(io_at(&self.dir))?;
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".jsonl")?;
                check_id(id).ok().map(|_| id.to_string())
            })
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    sessions: Mutex<BTreeMap<String, Vec<String>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// The raw JSONL lines written for a session.
    pub fn lines(&self, session_id: &str) -> Vec<String> {
        self.sessions.lock().get(session_id).cloned().unwrap_or_default()
    }
}

impl TurnStore for MemoryStore {
    fn create(&self, session_id: &str) -> Result<(), StoreError> {
        check_id(session_id)?;
        let mut sessions = self.sessions.lock();
        if sessions.contains_key(session_id) {
            return Err(StoreError::Exists(session_id.to_string()));
        }
        sessions.insert(session_id.to_string(), Vec::new());
        Ok(())
    }

    fn append(&self, session_id: &str, record: &TurnRecord) -> Result<(), StoreError> {
        check_id(session_id)?;
        self.sessions
            .lock()
            .entry(session_id.to_string())
            .or_default()
            .push(encode_record(record));
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Option<Vec<TurnRecord>>, StoreError> {
        let sessions = self.sessions.lock();
        let Some(lines) = sessions.get(session_id) else {
            return Ok(None);
        };
        let records = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    path: format!("memory:{session_id}"),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(records))
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.sessions.lock().keys().cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_restricted_to_safe_characters() {
        assert!(check_id("0f3a-b_9").is_ok());
        for bad in ["", "../etc", "a/b", "a.b", "x y"] {
            assert!(check_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn create_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = JsonlStore::open(dir.path().join("logs")).unwrap();
        store.create("abc").unwrap();
        assert!(matches!(store.create("abc"), Err(StoreError::Exists(_))));
        assert_eq!(store.load("abc").unwrap(), Some(vec![]));
        assert_eq!(store.load("nope").unwrap(), None);
        assert_eq!(store.list().unwrap(), ["abc"]);
    }
}
