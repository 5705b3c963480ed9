//! Append-only event log, the in-memory state folded from it, and replay.
//!
//! Every processed document produces `EidoIngested` followed by either
//! `IncidentCreated` + `EidoLinked` (with no breakdown) or a single
//! `EidoLinked` carrying the winning breakdown. Records are stamped with the
//! document's `issuedTimestamp`, so the log bytes are a pure function of the
//! input stream and configuration.

mod log;

use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::correlator::{
    CorrelationOutcome, Correlator, Decision, IncidentBook, IncidentContext, SimilarityBreakdown, TextVector,
};
use crate::model::{document_to_value, serialize_document, EidoDocument, ModelError, Validator};

pub use log::{parse_log, read_log, Durability, EventKind, EventLog, EventLogRecord, LogContents};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("inconsistent record {sequence}: {message}")]
    Inconsistent { sequence: u64, message: String },
    #[error("document {eido_id} was already ingested with different content")]
    ConflictingResubmission { eido_id: String },
}

impl StoreError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        StoreError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    fn inconsistent(sequence: u64, message: impl Into<String>) -> Self {
        StoreError::Inconsistent { sequence, message: message.into() }
    }
}

/// Typed view of a record's payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    EidoIngested(EidoDocument),
    IncidentCreated { incident_id: String, eido_id: String },
    EidoLinked { eido_id: String, incident_id: String, breakdown: Option<SimilarityBreakdown> },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::EidoIngested(_) => EventKind::EidoIngested,
            Event::IncidentCreated { .. } => EventKind::IncidentCreated,
            Event::EidoLinked { .. } => EventKind::EidoLinked,
        }
    }

    pub fn payload(&self) -> Value {
        match self {
            Event::EidoIngested(doc) => document_to_value(doc),
            Event::IncidentCreated { incident_id, eido_id } => json!({"incidentId": incident_id, "eidoId": eido_id}),
            Event::EidoLinked { eido_id, incident_id, breakdown } => json!({
                "eidoId": eido_id,
                "incidentId": incident_id,
                "breakdown": breakdown,
            }),
        }
    }

    pub fn from_record(rec: &EventLogRecord) -> Result<Self, StoreError> {
        let bad = |m: String| StoreError::inconsistent(rec.sequence, m);
        let text = |key: &str| {
            rec.payload
                .get(key)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad(format!("payload lacks {key}")))
        };
        Ok(match rec.kind {
            EventKind::EidoIngested => {
                let parsed =
                    Validator::lenient().parse_value(&rec.payload).map_err(|e: ModelError| bad(e.to_string()))?;
                Event::EidoIngested(parsed.document)
            }
            EventKind::IncidentCreated => {
                Event::IncidentCreated { incident_id: text("incidentId")?, eido_id: text("eidoId")? }
            }
            EventKind::EidoLinked => {
                let breakdown = match rec.payload.get("breakdown") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| bad(format!("breakdown: {e}")))?),
                };
                Event::EidoLinked { eido_id: text("eidoId")?, incident_id: text("incidentId")?, breakdown }
            }
        })
    }
}

/// Outcome of deciding one document against a snapshot, before commit.
#[derive(Debug, Clone, PartialEq)]
pub struct Decided {
    pub outcome: CorrelationOutcome,
    /// Incident the document ends up in.
    pub incident_id: String,
    /// Identical content already in the store; nothing will be written.
    pub resubmission: bool,
    pub records: Vec<EventLogRecord>,
}

/// State folded from the log: incidents and the documents they link.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    book: IncidentBook,
    docs: HashMap<String, EidoDocument>,
    ingest_order: Vec<String>,
    /// Incidents announced by `IncidentCreated` whose first link is pending.
    pending: HashMap<String, String>,
    applied: u64,
}

impl Snapshot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds a full record sequence.
    pub fn from_records(records: &[EventLogRecord], correlator: &Correlator) -> Result<Self, StoreError> {
        let mut s = Self::new();
        for r in records {
            s.apply(r, correlator)?;
        }
        Ok(s)
    }

    pub fn incidents(&self) -> &[IncidentContext] {
        self.book.incidents()
    }

    pub fn incident(&self, id: &str) -> Option<&IncidentContext> {
        self.book.get(id)
    }

    pub fn document(&self, eido_id: &str) -> Option<&EidoDocument> {
        self.docs.get(eido_id)
    }

    /// Documents in ingestion order.
    pub fn documents(&self) -> impl Iterator<Item = &EidoDocument> {
        self.ingest_order.iter().map(|id| &self.docs[id])
    }

    pub fn incident_of(&self, eido_id: &str) -> Option<&IncidentContext> {
        self.book.incident_of(eido_id)
    }

    pub fn records_applied(&self) -> u64 {
        self.applied
    }

    pub fn apply(&mut self, rec: &EventLogRecord, correlator: &Correlator) -> Result<(), StoreError> {
        let seq = rec.sequence;
        if seq != self.applied + 1 {
            return Err(StoreError::SequenceGap { expected: self.applied + 1, found: seq });
        }
        match Event::from_record(rec)? {
            Event::EidoIngested(doc) => {
                if self.docs.contains_key(&doc.eido_id) {
                    return Err(StoreError::inconsistent(seq, format!("{} ingested twice", doc.eido_id)));
                }
                self.ingest_order.push(doc.eido_id.clone());
                self.docs.insert(doc.eido_id.clone(), doc);
            }
            Event::IncidentCreated { incident_id, eido_id } => {
                if self.book.get(&incident_id).is_some() || self.pending.contains_key(&incident_id) {
                    return Err(StoreError::inconsistent(seq, format!("{incident_id} created twice")));
                }
                if !self.docs.contains_key(&eido_id) {
                    return Err(StoreError::inconsistent(seq, format!("{incident_id} founded by unknown {eido_id}")));
                }
                self.pending.insert(incident_id, eido_id);
            }
            Event::EidoLinked { eido_id, incident_id, .. } => {
                let doc = self
                    .docs
                    .get(&eido_id)
                    .ok_or_else(|| StoreError::inconsistent(seq, format!("link of unknown {eido_id}")))?;
                if self.book.incident_of(&eido_id).is_some() {
                    return Err(StoreError::inconsistent(seq, format!("{eido_id} linked twice")));
                }
                let vector = correlator.vectorize(doc);
                if self.pending.get(&incident_id) == Some(&eido_id) {
                    self.pending.remove(&incident_id);
                    self.book.open_with_id(&incident_id, doc, vector);
                } else if !self.book.link(&incident_id, doc, vector) {
                    return Err(StoreError::inconsistent(seq, format!("link to unknown {incident_id}")));
                }
            }
        }
        self.applied = seq;
        Ok(())
    }

    /// Correlates `doc` against the current incidents and prepares the
    /// records that commit the decision. Does not modify the snapshot.
    pub fn decide(
        &self,
        doc: &EidoDocument,
        vector: &TextVector,
        correlator: &Correlator,
    ) -> Result<Decided, StoreError> {
        let outcome = correlator.correlate_with_vector(doc, vector, self.book.incidents());
        if let Some(existing) = self.docs.get(&doc.eido_id) {
            if serialize_document(existing) != serialize_document(doc) {
                return Err(StoreError::ConflictingResubmission { eido_id: doc.eido_id.clone() });
            }
            let incident_id = self.book.incident_of(&doc.eido_id).map(|i| i.incident_id.clone()).unwrap_or_default();
            return Ok(Decided { outcome, incident_id, resubmission: true, records: Vec::new() });
        }

        let mut events = vec![Event::EidoIngested(doc.clone())];
        let incident_id = match &outcome.decision {
            Decision::LinkTo(id) => {
                let breakdown = outcome.ranked.iter().find(|b| &b.incident_id == id).cloned();
                events.push(Event::EidoLinked { eido_id: doc.eido_id.clone(), incident_id: id.clone(), breakdown });
                id.clone()
            }
            Decision::NewIncident => {
                let id = self.book.next_id();
                events.push(Event::IncidentCreated { incident_id: id.clone(), eido_id: doc.eido_id.clone() });
                events.push(Event::EidoLinked {
                    eido_id: doc.eido_id.clone(),
                    incident_id: id.clone(),
                    breakdown: None,
                });
                id
            }
        };
        let records = events
            .into_iter()
            .enumerate()
            .map(|(i, e)| EventLogRecord {
                sequence: self.applied + 1 + i as u64,
                kind: e.kind(),
                payload: e.payload(),
                recorded_at: doc.issued,
            })
            .collect();
        Ok(Decided { outcome, incident_id, resubmission: false, records })
    }
}

/// Snapshot plus an optional file-backed writer.
#[derive(Debug)]
pub struct Store {
    log: Option<EventLog>,
    snapshot: Snapshot,
}

impl Store {
    pub fn in_memory() -> Self {
        Self { log: None, snapshot: Snapshot::new() }
    }

    pub fn open(path: &Path, durability: Durability, correlator: &Correlator) -> Result<Self, StoreError> {
        let (log, records) = EventLog::open(path, durability)?;
        let snapshot = Snapshot::from_records(&records, correlator)?;
        Ok(Self { log: Some(log), snapshot })
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    /// Appends the decision's records, then folds them in.
    pub fn commit(&mut self, decided: &Decided, correlator: &Correlator) -> Result<(), StoreError> {
        for r in &decided.records {
            if let Some(log) = &mut self.log {
                log.append(r)?;
            }
            self.snapshot.apply(r, correlator)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub sequence: u64,
    /// Regenerated record line, if replay produced one at this sequence.
    pub expected: Option<String>,
    /// Recorded line, if the log has one at this sequence.
    pub recorded: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub documents: usize,
    pub regenerated: Vec<EventLogRecord>,
    pub divergence: Option<Divergence>,
}

/// Re-runs correlation over the logged documents in sequence order and
/// compares the regenerated records with the recorded ones.
pub fn replay(records: &[EventLogRecord], correlator: &Correlator) -> Result<ReplayReport, StoreError> {
    let mut docs = Vec::new();
    for r in records.iter().filter(|r| r.kind == EventKind::EidoIngested) {
        if let Event::EidoIngested(doc) = Event::from_record(r)? {
            docs.push(doc);
        }
    }
    let mut state = Snapshot::new();
    let mut regenerated = Vec::new();
    for doc in &docs {
        let decided = state.decide(doc, &correlator.vectorize(doc), correlator)?;
        for r in &decided.records {
            state.apply(r, correlator)?;
        }
        regenerated.extend(decided.records);
    }
    let n = regenerated.len().max(records.len());
    let divergence = (0..n).find_map(|i| {
        let a = regenerated.get(i).map(EventLogRecord::to_line);
        let b = records.get(i).map(EventLogRecord::to_line);
        (a != b).then(|| Divergence { sequence: i as u64 + 1, expected: a, recorded: b })
    });
    Ok(ReplayReport { documents: docs.len(), regenerated, divergence })
}
