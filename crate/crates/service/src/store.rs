//! Append-only JSON Lines event log, one file per session.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ca_core::boosters::HandoffSummary;
use ca_core::dialog::DialogState;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        at: DateTime<Utc>,
    },
    Turn {
        at: DateTime<Utc>,
        text: String,
        replies: Vec<String>,
    },
    Snapshot {
        state: Box<DialogState>,
    },
    Handoff {
        at: DateTime<Utc>,
        summary: HandoffSummary,
    },
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("session log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("session log {path} has no state snapshot")]
    NoSnapshot { path: PathBuf },
}

/// Session state rebuilt from its log.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub state: DialogState,
    pub handoff: Option<HandoffSummary>,
    pub events: usize,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    /// Uses `<data_dir>/sessions`, creating it if needed.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = data_dir.as_ref().join("sessions");
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Log path for `id`; only UUIDs are accepted so ids never escape the
    /// directory.
    pub fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        let uuid = Uuid::parse_str(id).map_err(|_| StoreError::InvalidId(id.to_string()))?;
        Ok(self.dir.join(format!("{}.jsonl", uuid.hyphenated())))
    }

    /// Appends `events` with a single write and syncs the file.
    pub fn append(&self, id: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        let path = self.path(id)?;
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e).expect("events serialize"));
            buf.push('\n');
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        file.write_all(buf.as_bytes()).map_err(io_err)?;
        file.sync_data().map_err(io_err)
    }

    pub fn read_events(&self, id: &str) -> Result<Option<Vec<SessionEvent>>, StoreError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        Ok(Some(parse_events(&text)))
    }

    /// Latest snapshot plus handoff status; `None` for unknown sessions.
    pub fn load(&self, id: &str) -> Result<Option<Replayed>, StoreError> {
        let Some(events) = self.read_events(id)? else {
            return Ok(None);
        };
        replay(&events)
            .map(Some)
            .ok_or_else(|| StoreError::NoSnapshot {
                path: self.path(id).unwrap_or_default(),
            })
    }
}

/// Parses a log, skipping lines that do not decode (a torn final write).
pub fn parse_events(text: &str) -> Vec<SessionEvent> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

pub fn replay(events: &[SessionEvent]) -> Option<Replayed> {
    let mut state = None;
    let mut handoff = None;
    for e in events {
        match e {
            SessionEvent::Snapshot { state: s } => state = Some((**s).clone()),
            SessionEvent::Handoff { summary, .. } => handoff = Some(summary.clone()),
            _ => {}
        }
    }
    state.map(|state| Replayed {
        state,
        handoff,
        events: events.len(),
    })
}
