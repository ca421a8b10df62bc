//! Session model and its append-only journal.
//!
//! A session's journal is one newline-delimited JSON file holding a
//! `created` event followed by `click` events. Replaying the events in order
//! rebuilds the session exactly; clicks carry the resolved surface point, so
//! replay never re-runs geometry.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use densecorr::mesh::PartId;
use densecorr::render::SurfacePoint;
use densecorr::sampler::Rle;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// One mask in a create request, given either as COCO RLE or as pixels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskInput {
    pub part: PartId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rle: Option<Rle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<[u32; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    pub masks: Vec<MaskInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionInfo {
    pub id: String,
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    /// Bounding box of the union of the masks, `[x, y, width, height]`.
    pub bbox: [f64; 4],
    pub created_ms: u64,
}

/// An image point to be located on the surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct Target {
    pub index: usize,
    pub part: PartId,
    pub x: u32,
    pub y: u32,
    /// Succession index within the part.
    pub succession: usize,
}

/// A resolved annotation of one target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorrespondencePoint {
    pub target: usize,
    pub x: u32,
    pub y: u32,
    pub part: PartId,
    pub view: usize,
    /// Where the annotator clicked, in view pixels.
    pub click: [f64; 2],
    pub surface: SurfacePoint,
    pub u: f64,
    pub v: f64,
    pub vertex: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Complete,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionState {
    pub info: SessionInfo,
    pub targets: Vec<Target>,
    pub cursor: usize,
    pub points: BTreeMap<usize, CorrespondencePoint>,
}

impl SessionState {
    pub fn new(info: SessionInfo, targets: Vec<Target>) -> Self {
        SessionState {
            info,
            targets,
            cursor: 0,
            points: BTreeMap::new(),
        }
    }

    pub fn status(&self) -> SessionStatus {
        if self.cursor == self.targets.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Active
        }
    }

    /// Whether annotating `target` now is a revision (`Some(true)`), a first
    /// annotation (`Some(false)`), or not allowed (`None`).
    pub fn classify(&self, target: usize) -> Option<bool> {
        if target < self.cursor {
            Some(true)
        } else if target == self.cursor && target < self.targets.len() {
            Some(false)
        } else {
            None
        }
    }

    pub fn apply(&mut self, event: &JournalEvent) -> Result<(), ServiceError> {
        match event {
            JournalEvent::Created { .. } => Err(ServiceError::Journal("duplicate created event".into())),
            JournalEvent::Click { point, revision } => {
                match self.classify(point.target) {
                    Some(r) if r == *revision => {}
                    _ => {
                        return Err(ServiceError::Journal(format!(
                            "click on target {} inconsistent with cursor {}",
                            point.target, self.cursor
                        )))
                    }
                }
                self.points.insert(point.target, point.clone());
                if !revision {
                    self.cursor += 1;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Created { session: SessionInfo, targets: Vec<Target> },
    Click { point: CorrespondencePoint, revision: bool },
}

/// Append handle to one session's journal.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

fn journal_err(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Journal(format!("{}: {e}", path.display()))
}

impl Journal {
    pub fn create(path: PathBuf) -> Result<Self, ServiceError> {
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| journal_err(&path, e))?;
        Ok(Journal { path, file })
    }

    pub fn open(path: PathBuf) -> Result<Self, ServiceError> {
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| journal_err(&path, e))?;
        Ok(Journal { path, file })
    }

    /// Appends one event and flushes it to disk before returning.
    pub fn append(&mut self, event: &JournalEvent) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event).map_err(|e| journal_err(&self.path, e))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| journal_err(&self.path, e))?;
        self.file.sync_data().map_err(|e| journal_err(&self.path, e))
    }
}

/// Rebuilds a session from its journal. A final line cut short by a crash is
/// dropped (and truncated away so later appends stay well-formed); any other
/// malformed line is an error.
pub fn replay(path: &Path) -> Result<SessionState, ServiceError> {
    let file = File::open(path).map_err(|e| journal_err(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).split(b'\n') {
        lines.push(line.map_err(|e| journal_err(path, e))?);
    }
    let raw = fs::read(path).map_err(|e| journal_err(path, e))?;
    let torn_tail = !raw.is_empty() && raw.last() != Some(&b'\n');

    let mut state: Option<SessionState> = None;
    let mut valid_len = 0usize;
    let count = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            valid_len += line.len() + 1;
            continue;
        }
        let event: JournalEvent = match serde_json::from_slice(line) {
            Ok(e) => e,
            Err(_) if torn_tail && i + 1 == count => {
                tracing::warn!(path = %path.display(), "dropping torn final journal line");
                let f = OpenOptions::new().write(true).open(path).map_err(|e| journal_err(path, e))?;
                f.set_len(valid_len as u64).map_err(|e| journal_err(path, e))?;
                break;
            }
            Err(e) => return Err(journal_err(path, format!("line {}: {e}", i + 1))),
        };
        match (&mut state, event) {
            (None, JournalEvent::Created { session, targets }) => state = Some(SessionState::new(session, targets)),
            (None, _) => return Err(journal_err(path, "journal does not start with a created event")),
            (Some(s), event) => s.apply(&event)?,
        }
        valid_len += line.len() + 1;
    }
    state.ok_or_else(|| journal_err(path, "empty journal"))
}
