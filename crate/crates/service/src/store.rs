//! Session persistence.
//!
//! A [`StoreRecord`] is the canonical session document, its append-only
//! event log and a SHA-256 checksum of the document. [`FileStore`] keeps
//! one document and one event file per session in a single directory.
//! Writes go event file first, then the document via temp file and rename;
//! the document records how many event-file bytes it covers, so a crash
//! between the two steps leaves an uncommitted tail that loads ignore.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use threadwise_core::canonical::to_canonical_string;
use threadwise_core::model::{EventRecord, Session, SessionId};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("stored session {id} is corrupt: {reason}")]
    StorageCorrupt { id: String, reason: String },
    #[error("storage i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub checksum: String,
    pub session: Session,
    pub events: Vec<EventRecord>,
}

/// Hex SHA-256 of the canonical session document.
pub fn checksum(session: &Session) -> String {
    let doc = to_canonical_string(session).expect("sessions serialize");
    hex::encode(Sha256::digest(doc.as_bytes()))
}

impl StoreRecord {
    pub fn new(session: Session, events: Vec<EventRecord>) -> Self {
        Self {
            checksum: checksum(&session),
            session,
            events,
        }
    }

    pub fn verify(&self) -> Result<(), StoreError> {
        let actual = checksum(&self.session);
        if actual != self.checksum {
            return Err(StoreError::StorageCorrupt {
                id: self.session.id.to_string(),
                reason: format!("checksum {} does not match document ({actual})", self.checksum),
            });
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> String {
        to_canonical_string(self).expect("records serialize")
    }
}

pub trait Store: Send + Sync {
    /// Persists `session` and appends `new_events` as one atomic step.
    fn commit(&self, session: &Session, new_events: &[EventRecord]) -> Result<(), StoreError>;
    fn load(&self, id: &SessionId) -> Result<StoreRecord, StoreError>;
    fn list(&self) -> Result<Vec<SessionId>, StoreError>;
}

#[derive(Default)]
pub struct InMemoryStore {
    records: Mutex<HashMap<SessionId, (String, Vec<EventRecord>)>>,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for InMemoryStore {
    fn commit(&self, session: &Session, new_events: &[EventRecord]) -> Result<(), StoreError> {
        let doc = to_canonical_string(session).expect("sessions serialize");
        let mut records = self.records.lock();
        let entry = records.entry(session.id.clone()).or_default();
        entry.0 = doc;
        entry.1.extend_from_slice(new_events);
        Ok(())
    }

    fn load(&self, id: &SessionId) -> Result<StoreRecord, StoreError> {
        let records = self.records.lock();
        let (doc, events) = records
            .get(id)
            .ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
        let session: Session = serde_json::from_str(doc).map_err(|e| StoreError::StorageCorrupt {
            id: id.to_string(),
            reason: e.to_string(),
        })?;
        Ok(StoreRecord::new(session, events.clone()))
    }

    fn list(&self) -> Result<Vec<SessionId>, StoreError> {
        let mut ids: Vec<SessionId> = self.records.lock().keys().cloned().collect();
        ids.sort();
        Ok(ids)
    }
}

/// On-disk document: the session, its checksum and the committed length
/// of the event file.
#[derive(Serialize, Deserialize)]
struct Document {
    checksum: String,
    event_bytes: u64,
    session: Session,
}

pub struct FileStore {
    dir: PathBuf,
    // committed event-file length per session, cached after first touch
    offsets: Mutex<HashMap<SessionId, u64>>,
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn corrupt(id: &SessionId, reason: impl Into<String>) -> StoreError {
    StoreError::StorageCorrupt {
        id: id.to_string(),
        reason: reason.into(),
    }
}

impl FileStore {
    /// Opens `dir`, creating it when its parent exists.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        if !dir.is_dir() {
            fs::create_dir(&dir)?;
        }
        Ok(Self {
            dir,
            offsets: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn doc_path(&self, id: &SessionId) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub fn events_path(&self, id: &SessionId) -> PathBuf {
        self.dir.join(format!("{id}.events.jsonl"))
    }

    fn read_doc(&self, id: &SessionId) -> Result<Document, StoreError> {
        if !is_safe_id(id.as_str()) {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        let bytes = match fs::read(self.doc_path(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::UnknownSession(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let doc: Document = serde_json::from_slice(&bytes).map_err(|e| corrupt(id, format!("unreadable document: {e}")))?;
        if doc.session.id != *id {
            return Err(corrupt(id, format!("document holds session {}", doc.session.id)));
        }
        let actual = checksum(&doc.session);
        if actual != doc.checksum {
            return Err(corrupt(id, "checksum does not match document"));
        }
        Ok(doc)
    }

    fn committed_offset(&self, id: &SessionId) -> Result<u64, StoreError> {
        if let Some(off) = self.offsets.lock().get(id) {
            return Ok(*off);
        }
        let off = match self.read_doc(id) {
            Ok(doc) => doc.event_bytes,
            Err(StoreError::UnknownSession(_)) => 0,
            Err(e) => return Err(e),
        };
        self.offsets.lock().insert(id.clone(), off);
        Ok(off)
    }

    fn sync_dir(&self) {
        // directory fsync is best effort; not every platform allows it
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
    }
}

impl Store for FileStore {
    fn commit(&self, session: &Session, new_events: &[EventRecord]) -> Result<(), StoreError> {
        let id = &session.id;
        if !is_safe_id(id.as_str()) {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        let committed = self.committed_offset(id)?;

        let mut events = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(self.events_path(id))?;
        // drop any tail left by a crash after an earlier append
        events.set_len(committed)?;
        events.seek(SeekFrom::Start(committed))?;
        let mut buf = String::new();
        for e in new_events {
            buf.push_str(&to_canonical_string(e).expect("events serialize"));
            buf.push('\n');
        }
        events.write_all(buf.as_bytes())?;
        events.sync_data()?;
        let event_bytes = committed + buf.len() as u64;

        let doc = Document {
            checksum: checksum(session),
            event_bytes,
            session: session.clone(),
        };
        let tmp = self.dir.join(format!(".{id}.json.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(to_canonical_string(&doc).expect("documents serialize").as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.doc_path(id))?;
        self.sync_dir();
        self.offsets.lock().insert(id.clone(), event_bytes);
        Ok(())
    }

    fn load(&self, id: &SessionId) -> Result<StoreRecord, StoreError> {
        let doc = self.read_doc(id)?;
        let mut bytes = Vec::new();
        match File::open(self.events_path(id)) {
            Ok(mut f) => {
                f.read_to_end(&mut bytes)?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        let committed = usize::try_from(doc.event_bytes).map_err(|_| corrupt(id, "event offset overflows"))?;
        if bytes.len() < committed {
            return Err(corrupt(
                id,
                format!("event log has {} bytes, document covers {committed}", bytes.len()),
            ));
        }
        let text = std::str::from_utf8(&bytes[..committed]).map_err(|_| corrupt(id, "event log is not UTF-8"))?;
        let events = text
            .lines()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|e| corrupt(id, format!("event line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<EventRecord>, _>>()?;
        Ok(StoreRecord {
            checksum: doc.checksum,
            session: doc.session,
            events,
        })
    }

    fn list(&self) -> Result<Vec<SessionId>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(stem) = name.strip_suffix(".json") {
                if is_safe_id(stem) {
                    ids.push(SessionId::from(stem));
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
