//! One directory per session: an append-only event log whose lines carry a
//! checksum, plus a snapshot of the folded state for quick reads.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nesy_core::workflow::{Event, SessionState, WorkflowError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const EVENTS: &str = "events.jsonl";
const SNAPSHOT: &str = "snapshot.json";
const META: &str = "meta.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("session `{0}` does not exist")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error("session `{id}` cannot be rebuilt: {source}")]
    Corrupt { id: String, source: WorkflowError },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Who owns a session and when it was touched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    sum: String,
    event: Event,
}

pub fn checksum(event_json: &str) -> String {
    hex::encode(Sha256::digest(event_json.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn write_atomic(path: &Path, text: &str) -> Result<(), StoreError> {
        let tmp = path.with_extension("tmp");
        let mut f = File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(text.as_bytes()).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
        fs::rename(&tmp, path).map_err(io(path))
    }

    pub fn create(&self, state: &SessionState, owner: Option<&str>) -> Result<Envelope, StoreError> {
        let dir = self.session_dir(&state.session_id);
        if dir.exists() {
            return Err(StoreError::Exists(state.session_id.clone()));
        }
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let now = now_secs();
        let envelope =
            Envelope { session_id: state.session_id.clone(), owner: owner.map(str::to_string), created_at: now, updated_at: now };
        File::create(dir.join(EVENTS)).map_err(io(&dir))?;
        self.save(state, 0, &envelope)?;
        Ok(envelope)
    }

    /// Appends the events from `from` onwards and refreshes the snapshot.
    pub fn save(&self, state: &SessionState, from: usize, envelope: &Envelope) -> Result<Envelope, StoreError> {
        let dir = self.session_dir(&state.session_id);
        let path = dir.join(EVENTS);
        let mut log = OpenOptions::new().append(true).open(&path).map_err(io(&path))?;
        let mut buf = String::new();
        for record in &state.events[from.min(state.events.len())..] {
            let event = serde_json::to_string(&record.event).expect("events serialize");
            buf.push_str(&format!("{{\"sum\":\"{}\",\"event\":{event}}}\n", checksum(&event)));
        }
        log.write_all(buf.as_bytes()).map_err(io(&path))?;
        log.sync_data().map_err(io(&path))?;
        let envelope = Envelope { updated_at: now_secs(), ..envelope.clone() };
        Self::write_atomic(&dir.join(SNAPSHOT), &serde_json::to_string(state).expect("state serializes"))?;
        Self::write_atomic(&dir.join(META), &serde_json::to_string_pretty(&envelope).expect("meta serializes"))?;
        Ok(envelope)
    }

    /// Replays the log up to its last intact line. A torn or tampered tail
    /// is dropped, and the log is rewritten without it.
    pub fn load(&self, id: &str) -> Result<(SessionState, Envelope), StoreError> {
        let dir = self.session_dir(id);
        let path = dir.join(EVENTS);
        let file = File::open(&path).map_err(|_| StoreError::NotFound(id.to_string()))?;
        let mut events = Vec::new();
        let mut intact = Vec::new();
        let mut torn = false;
        for line in BufReader::new(file).lines() {
            let Ok(line) = line else {
                torn = true;
                break;
            };
            let Ok(parsed) = serde_json::from_str::<LogLine>(&line) else {
                torn = true;
                break;
            };
            let event = serde_json::to_string(&parsed.event).expect("events serialize");
            if checksum(&event) != parsed.sum {
                torn = true;
                break;
            }
            events.push(parsed.event);
            intact.push(line);
        }
        let state = SessionState::replay(events).map_err(|source| StoreError::Corrupt { id: id.to_string(), source })?;
        if torn {
            let text: String = intact.iter().map(|l| format!("{l}\n")).collect();
            Self::write_atomic(&path, &text)?;
            Self::write_atomic(&dir.join(SNAPSHOT), &serde_json::to_string(&state).expect("state serializes"))?;
        }
        let envelope = fs::read_to_string(dir.join(META))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or(Envelope { session_id: id.to_string(), owner: None, created_at: 0, updated_at: 0 });
        Ok((state, envelope))
    }

    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io(&self.root))? {
            let entry = entry.map_err(io(&self.root))?;
            if entry.path().join(EVENTS).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}
