//! Append-only, file-backed event log. Each event kind has its own
//! newline-delimited JSON file; a global sequence number orders events
//! across files so replay reproduces the original order.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::study::StudyEvent;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("cannot serialize event: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io { .. } => "Io",
            StoreError::Corrupt { .. } => "CorruptLog",
            StoreError::Serialize(_) => "Serialize",
        }
    }
}

/// Destination for study events. Appends must be durable before returning.
pub trait EventSink {
    fn append(&mut self, event: &StudyEvent) -> Result<(), StoreError>;
}

/// In-memory sink, for tests and dry runs.
impl EventSink for Vec<StudyEvent> {
    fn append(&mut self, event: &StudyEvent) -> Result<(), StoreError> {
        self.push(event.clone());
        Ok(())
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    seq: u64,
    event: &'a StudyEvent,
}

#[derive(Deserialize)]
struct LineIn {
    seq: u64,
    event: StudyEvent,
}

/// Event log rooted at a directory.
#[derive(Debug)]
pub struct EventStore {
    dir: PathBuf,
    next_seq: u64,
    files: HashMap<&'static str, File>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Reads one log file, truncating a torn final line left by a crash
/// mid-write. Every complete line must parse.
fn read_log(path: &Path) -> Result<Vec<LineIn>, StoreError> {
    let mut bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        warn!(path = %path.display(), dropped = bytes.len() - keep, "truncating torn final line");
        let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        file.set_len(keep as u64).map_err(io_err(path))?;
        file.sync_data().map_err(io_err(path))?;
        bytes.truncate(keep);
    }
    let text = String::from_utf8(bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<LineIn>(l).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

impl EventStore {
    /// Opens (creating if needed) the log in `dir` and returns it together
    /// with every stored event in append order.
    pub fn open(dir: &Path) -> Result<(EventStore, Vec<StudyEvent>), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut ordered: BTreeMap<u64, StudyEvent> = BTreeMap::new();
        for kind in StudyEvent::KINDS {
            let path = dir.join(format!("{kind}.jsonl"));
            for (n, line) in read_log(&path)?.into_iter().enumerate() {
                if line.event.kind() != kind {
                    return Err(StoreError::Corrupt {
                        path,
                        line: n + 1,
                        reason: format!("{} event in the {kind} log", line.event.kind()),
                    });
                }
                if ordered.insert(line.seq, line.event).is_some() {
                    return Err(StoreError::Corrupt { path, line: n + 1, reason: format!("duplicate seq {}", line.seq) });
                }
            }
        }
        let next_seq = ordered.keys().next_back().map_or(1, |s| s + 1);
        let store = EventStore { dir: dir.to_path_buf(), next_seq, files: HashMap::new() };
        Ok((store, ordered.into_values().collect()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Sequence number the next append will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    fn file(&mut self, kind: &'static str) -> Result<&mut File, StoreError> {
        if !self.files.contains_key(kind) {
            let path = self.dir.join(format!("{kind}.jsonl"));
            let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
            self.files.insert(kind, file);
        }
        Ok(self.files.get_mut(kind).expect("inserted above"))
    }
}

impl EventSink for EventStore {
    /// Writes the event as one line and syncs it to disk.
    fn append(&mut self, event: &StudyEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&LineOut { seq: self.next_seq, event })?;
        line.push(b'\n');
        let path = self.dir.join(format!("{}.jsonl", event.kind()));
        let file = self.file(event.kind())?;
        file.write_all(&line).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))?;
        self.next_seq += 1;
        Ok(())
    }
}
