//! Search sessions and their append-only journals.
//!
//! Every state change is an event: it is written to the session's journal
//! and then applied. Replaying a journal applies the same events in the
//! same order and so rebuilds the same state.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use dupviper::groups::GroupJson;
use dupviper::search::{ResultJson, SearchParams};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub b: usize,
    pub e: usize,
    pub distance: usize,
    pub status: ElementStatus,
}

/// The pattern of a search request: an interval of the session's document
/// or a literal string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Interval { b: usize, e: usize },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub pattern: PatternSpec,
    pub pattern_text: String,
    pub params: SearchParams,
    pub result: ResultJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EditAction {
    Reject,
    Restore,
    Accept,
    SetBounds { b: usize, e: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Created {
        session_id: String,
        doc_id: String,
    },
    Searched {
        record: SearchRecord,
    },
    Edited {
        index: usize,
        action: EditAction,
        element: Element,
    },
    GroupSaved {
        group: GroupJson,
    },
}

/// Outcome of a search job, as delivered to the client.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Running,
    Done { status: u16, body: String },
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub doc_id: String,
    pub search: Option<SearchRecord>,
    pub elements: Vec<Element>,
    pub groups: Vec<GroupJson>,
    /// Token of the search currently running, if any.
    pub in_flight: Option<String>,
    pub jobs: HashMap<String, Job>,
    journal: Option<PathBuf>,
}

impl Session {
    /// A new session journaled to `journal` (when given).
    pub fn create(id: String, doc_id: String, journal: Option<PathBuf>) -> Result<Self, ApiError> {
        let mut s = Session::empty(id.clone(), doc_id.clone(), journal);
        s.record(JournalEvent::Created { session_id: id, doc_id })?;
        Ok(s)
    }

    fn empty(id: String, doc_id: String, journal: Option<PathBuf>) -> Self {
        Session {
            id,
            doc_id,
            search: None,
            elements: Vec::new(),
            groups: Vec::new(),
            in_flight: None,
            jobs: HashMap::new(),
            journal,
        }
    }

    /// Rebuilds a session from its journal file.
    pub fn replay(path: &Path) -> Result<Self, ApiError> {
        let reader = BufReader::new(File::open(path)?);
        let mut session: Option<Session> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: JournalEvent = serde_json::from_str(&line)
                .map_err(|e| ApiError::Internal(format!("{}:{}: {e}", path.display(), n + 1)))?;
            match (&mut session, &ev) {
                (None, JournalEvent::Created { session_id, doc_id }) => {
                    session = Some(Session::empty(
                        session_id.clone(),
                        doc_id.clone(),
                        Some(path.to_path_buf()),
                    ));
                }
                (Some(s), _) => s.apply(&ev),
                (None, _) => {
                    return Err(ApiError::Internal(format!(
                        "{}: journal does not start with a creation",
                        path.display()
                    )))
                }
            }
        }
        session.ok_or_else(|| ApiError::Internal(format!("{}: empty journal", path.display())))
    }

    /// Appends the event to the journal, then applies it.
    pub fn record(&mut self, ev: JournalEvent) -> Result<(), ApiError> {
        if let Some(path) = &self.journal {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&ev)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.apply(&ev);
        Ok(())
    }

    fn apply(&mut self, ev: &JournalEvent) {
        match ev {
            JournalEvent::Created { .. } => {}
            JournalEvent::Searched { record } => {
                self.elements = record
                    .result
                    .elements
                    .iter()
                    .map(|el| Element {
                        b: el.b,
                        e: el.e,
                        distance: el.distance,
                        status: ElementStatus::Pending,
                    })
                    .collect();
                self.search = Some(record.clone());
            }
            JournalEvent::Edited { index, element, .. } => {
                if let Some(slot) = self.elements.get_mut(*index) {
                    *slot = element.clone();
                }
            }
            JournalEvent::GroupSaved { group } => self.groups.push(group.clone()),
        }
    }

    pub fn element(&self, index: usize) -> Result<&Element, ApiError> {
        self.elements
            .get(index)
            .ok_or_else(|| ApiError::NotFound(format!("result element {index}")))
    }
}

/// Loads every `*.jsonl` journal in `dir`.
pub fn replay_all(dir: &Path) -> Result<Vec<Session>, ApiError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|s| s.to_str()) == Some("jsonl"))
        .collect();
    paths.sort();
    for p in paths {
        out.push(Session::replay(&p)?);
    }
    Ok(out)
}
