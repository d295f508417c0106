//! Design sessions persisted in one JSON file.
//!
//! Every mutation writes the whole store to a temporary file in the data
//! directory and renames it over `sessions.json`, so a crash leaves either
//! the old or the new file, never a torn one. Writes are serialized by a
//! mutex; reads are served from memory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use softsnap_core::io::{Document, SCHEMA_VERSION};
use softsnap_core::{SkeletonConfig, ThreadingPattern};

pub const STORE_FILE: &str = "sessions.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub index: usize,
    pub timestamp: DateTime<Utc>,
    /// `solve`, `design`, or a client-chosen label.
    pub kind: String,
    pub query: Value,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedPattern {
    pub name: String,
    pub offsets: Vec<f64>,
    pub saved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSession {
    pub session_id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub created_at: DateTime<Utc>,
    pub config: SkeletonConfig,
    pub saved_patterns: Vec<SavedPattern>,
    pub history: Vec<HistoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub name: Option<String>,
    pub created_at: DateTime<Utc>,
    pub history_len: usize,
    pub saved_patterns: usize,
}

impl From<&DesignSession> for SessionSummary {
    fn from(s: &DesignSession) -> Self {
        SessionSummary {
            session_id: s.session_id.clone(),
            name: s.name.clone(),
            created_at: s.created_at,
            history_len: s.history.len(),
            saved_patterns: s.saved_patterns.len(),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StoreContents {
    sessions: BTreeMap<String, DesignSession>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("session store: {0}")]
    Io(String),
}

pub struct SessionStore {
    path: PathBuf,
    contents: Mutex<StoreContents>,
}

impl SessionStore {
    /// Opens the store in `data_dir`, creating the directory if needed.
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(data_dir).map_err(|e| StoreError::Io(format!("{}: {e}", data_dir.display())))?;
        let path = data_dir.join(STORE_FILE);
        let contents = match fs::read_to_string(&path) {
            Ok(text) => {
                let doc: Document<StoreContents> = serde_json::from_str(&text)
                    .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
                doc.into_body().map_err(|e| StoreError::Io(e.to_string()))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreContents::default(),
            Err(e) => return Err(StoreError::Io(format!("{}: {e}", path.display()))),
        };
        Ok(SessionStore {
            path,
            contents: Mutex::new(contents),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn create(&self, config: SkeletonConfig, name: Option<String>) -> Result<DesignSession, StoreError> {
        let session = DesignSession {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            name,
            created_at: Utc::now(),
            config,
            saved_patterns: Vec::new(),
            history: Vec::new(),
        };
        self.mutate(|c| {
            c.sessions.insert(session.session_id.clone(), session.clone());
            Ok(session.clone())
        })
    }

    pub fn get(&self, id: &str) -> Result<DesignSession, StoreError> {
        let contents = self.contents.lock().expect("store lock");
        contents
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(id.to_string()))
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let contents = self.contents.lock().expect("store lock");
        let mut out: Vec<SessionSummary> = contents.sessions.values().map(SessionSummary::from).collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.session_id.cmp(&b.session_id)));
        out
    }

    pub fn append(&self, id: &str, kind: &str, query: Value, result: Value) -> Result<HistoryRecord, StoreError> {
        self.mutate(|c| {
            let session = c
                .sessions
                .get_mut(id)
                .ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
            let record = HistoryRecord {
                index: session.history.len(),
                timestamp: Utc::now(),
                kind: kind.to_string(),
                query,
                result,
            };
            session.history.push(record.clone());
            Ok(record)
        })
    }

    /// Saves `offsets` under `name`, replacing an earlier pattern of that name.
    pub fn save_pattern(&self, id: &str, name: &str, offsets: Vec<f64>) -> Result<DesignSession, StoreError> {
        self.mutate(|c| {
            let session = c
                .sessions
                .get_mut(id)
                .ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
            ThreadingPattern::new(&session.config, offsets.clone())
                .map_err(|e| StoreError::InvalidPattern(e.to_string()))?;
            let saved = SavedPattern {
                name: name.to_string(),
                offsets,
                saved_at: Utc::now(),
            };
            match session.saved_patterns.iter_mut().find(|p| p.name == name) {
                Some(existing) => *existing = saved,
                None => session.saved_patterns.push(saved),
            }
            Ok(session.clone())
        })
    }

    /// Applies `f` to a copy of the store, persists the copy, then commits it.
    fn mutate<T>(&self, f: impl FnOnce(&mut StoreContents) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut guard = self.contents.lock().expect("store lock");
        let mut next = StoreContents {
            sessions: guard.sessions.clone(),
        };
        let out = f(&mut next)?;
        self.persist(&next)?;
        *guard = next;
        Ok(out)
    }

    fn persist(&self, contents: &StoreContents) -> Result<(), StoreError> {
        let io = |e: std::io::Error| StoreError::Io(format!("{}: {e}", self.path.display()));
        let dir = self.path.parent().unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        let doc = Document {
            schema: SCHEMA_VERSION,
            body: contents,
        };
        serde_json::to_writer_pretty(&mut tmp, &doc).map_err(|e| StoreError::Io(e.to_string()))?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&self.path).map_err(|e| io(e.error))?;
        Ok(())
    }
}
