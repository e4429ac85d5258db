//! Durable storage: an append-only JSON-lines event log plus an optional
//! snapshot of the derived state. Opening a data directory loads the
//! snapshot (if any) and replays every later log record.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::state::{ForumState, LogRecord};

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: corrupt snapshot: {message}")]
    CorruptSnapshot { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    state: ForumState,
}

/// Appends records to the log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    out: BufWriter<File>,
    durable: bool,
}

impl EventLog {
    fn open_append(path: PathBuf, durable: bool) -> Result<Self, StoreError> {
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(EventLog {
            path,
            out: BufWriter::new(file),
            durable,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), StoreError> {
        serde_json::to_writer(&mut self.out, record).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        if self.durable {
            self.out.get_ref().sync_data()?;
        }
        Ok(())
    }
}

/// Parses every record of a log file, halting on the first bad line.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line).map_err(|e| StoreError::CorruptLog {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Rebuilds state from a data directory and opens its log for appending.
pub fn open_data_dir(dir: &Path, durable: bool) -> Result<(ForumState, EventLog), StoreError> {
    fs::create_dir_all(dir)?;
    let snapshot_path = dir.join(SNAPSHOT_FILE);
    let mut state = match fs::read(&snapshot_path) {
        Ok(bytes) => {
            let snap: Snapshot =
                serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptSnapshot {
                    path: snapshot_path.clone(),
                    message: e.to_string(),
                })?;
            if snap.seq != snap.state.last_seq() {
                return Err(StoreError::CorruptSnapshot {
                    path: snapshot_path,
                    message: format!(
                        "header seq {} disagrees with state seq {}",
                        snap.seq,
                        snap.state.last_seq()
                    ),
                });
            }
            snap.state
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => ForumState::new(),
        Err(e) => return Err(e.into()),
    };

    let log_path = dir.join(LOG_FILE);
    replay_into(&mut state, &log_path)?;
    let log = EventLog::open_append(log_path, durable)?;
    Ok((state, log))
}

/// Applies every log record newer than the state's sequence number.
pub fn replay_into(state: &mut ForumState, log_path: &Path) -> Result<(), StoreError> {
    let file = match File::open(log_path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    let corrupt = |line: usize, message: String| StoreError::CorruptLog {
        path: log_path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord =
            serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        if record.seq <= state.last_seq() {
            continue;
        }
        state
            .apply(&record)
            .map_err(|e| corrupt(i + 1, format!("record {} does not apply: {e}", record.seq)))?;
    }
    Ok(())
}

/// Writes the snapshot atomically (temp file, then rename).
pub fn write_snapshot(dir: &Path, state: &ForumState) -> Result<(), StoreError> {
    let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    let snap = Snapshot {
        seq: state.last_seq(),
        state: state.clone(),
    };
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut out, &snap).map_err(std::io::Error::from)?;
        out.flush()?;
        out.get_ref().sync_all()?;
    }
    fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
    Ok(())
}
