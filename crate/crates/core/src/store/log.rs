use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::model::Timestamp;

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    EidoIngested,
    IncidentCreated,
    EidoLinked,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::EidoIngested => "EidoIngested",
            EventKind::IncidentCreated => "IncidentCreated",
            EventKind::EidoLinked => "EidoLinked",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [EventKind::EidoIngested, EventKind::IncidentCreated, EventKind::EidoLinked]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLogRecord {
    pub sequence: u64,
    pub kind: EventKind,
    pub payload: Value,
    pub recorded_at: Timestamp,
}

impl EventLogRecord {
    /// Canonical single-line JSON, without the trailing newline.
    pub fn to_line(&self) -> String {
        json!({
            "sequence": self.sequence,
            "kind": self.kind.as_str(),
            "payload": self.payload,
            "recordedAt": self.recorded_at.to_string(),
        })
        .to_string()
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("record is not an object")?;
        if obj.len() != 4 {
            return Err("record must have exactly sequence, kind, payload and recordedAt".into());
        }
        let sequence = obj.get("sequence").and_then(Value::as_u64).ok_or("missing or invalid sequence")?;
        let kind =
            obj.get("kind").and_then(Value::as_str).and_then(EventKind::parse).ok_or("missing or unknown kind")?;
        let payload = obj.get("payload").cloned().ok_or("missing payload")?;
        let recorded_at = obj
            .get("recordedAt")
            .and_then(Value::as_str)
            .ok_or("missing recordedAt")?
            .parse::<Timestamp>()
            .map_err(|e| format!("recordedAt: {e}"))?;
        Ok(Self { sequence, kind, payload, recorded_at })
    }
}

/// Result of reading a log file without modifying it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogContents {
    pub records: Vec<EventLogRecord>,
    /// Bytes after the last newline: an interrupted append, ignored.
    pub torn_tail_bytes: usize,
    /// Byte length of the committed prefix.
    pub committed_len: u64,
}

/// Parses log bytes. Complete lines must parse and number 1, 2, 3, ...
pub fn parse_log(bytes: &[u8]) -> Result<LogContents, StoreError> {
    let committed = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let text = std::str::from_utf8(&bytes[..committed])
        .map_err(|e| StoreError::Corrupt { line: 0, message: format!("log is not UTF-8: {e}") })?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let rec = EventLogRecord::from_line(line).map_err(|message| StoreError::Corrupt { line: i + 1, message })?;
        let expected = records.len() as u64 + 1;
        if rec.sequence != expected {
            return Err(StoreError::SequenceGap { expected, found: rec.sequence });
        }
        records.push(rec);
    }
    Ok(LogContents { records, torn_tail_bytes: bytes.len() - committed, committed_len: committed as u64 })
}

pub fn read_log(path: &Path) -> Result<LogContents, StoreError> {
    match std::fs::read(path) {
        Ok(bytes) => parse_log(&bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(LogContents::default()),
        Err(e) => Err(StoreError::io(path, e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// Hand each record to the OS before returning.
    #[default]
    Flush,
    /// Also fsync after every record.
    Fsync,
}

/// Append-only JSON-lines log with a single writer.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_sequence: u64,
    durability: Durability,
}

impl EventLog {
    /// Opens or creates the log, cutting off any torn final line, and
    /// returns the committed records alongside the writer.
    pub fn open(path: &Path, durability: Durability) -> Result<(Self, Vec<EventLogRecord>), StoreError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(|e| StoreError::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| StoreError::io(path, e))?;
        let contents = parse_log(&bytes)?;
        if contents.torn_tail_bytes > 0 {
            file.set_len(contents.committed_len).map_err(|e| StoreError::io(path, e))?;
        }
        file.seek(SeekFrom::End(0)).map_err(|e| StoreError::io(path, e))?;
        let log = Self { path: path.to_path_buf(), file, next_sequence: contents.records.len() as u64 + 1, durability };
        Ok((log, contents.records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_sequence(&self) -> u64 {
        self.next_sequence
    }

    /// Writes one record; its sequence must be the next one.
    pub fn append(&mut self, record: &EventLogRecord) -> Result<u64, StoreError> {
        if record.sequence != self.next_sequence {
            return Err(StoreError::SequenceGap { expected: self.next_sequence, found: record.sequence });
        }
        let mut line = record.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| StoreError::io(&self.path, e))?;
        self.file.flush().map_err(|e| StoreError::io(&self.path, e))?;
        if self.durability == Durability::Fsync {
            self.file.sync_data().map_err(|e| StoreError::io(&self.path, e))?;
        }
        self.next_sequence += 1;
        Ok(record.sequence)
    }
}
