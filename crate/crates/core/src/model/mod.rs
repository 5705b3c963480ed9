//! The EIDO-JSON subset exchanged by every other module.
//!
//! Documents are plain immutable values. [`Validator`] turns text into a
//! checked [`EidoDocument`] and [`serialize_document`] writes the canonical
//! form (sorted keys, no insignificant whitespace) that the event log, the
//! CLI and the round-trip tests rely on.

mod codec;
mod geometry;
mod timestamp;
mod validate;
mod vocabulary;

use std::collections::BTreeMap;

use serde_json::Value;
use thiserror::Error;

pub use codec::{document_from_value, document_to_value, location_to_value, parse_document, serialize_document};
pub use geometry::{Geometry, GeometryError, LatLon};
pub use timestamp::{parse_utc_offset, Timestamp};
pub use validate::{Parsed, ValidationWarning, Validator};
pub use vocabulary::Vocabulary;

/// Component lists of a document with the member names each item may carry.
pub const COMPONENT_LISTS: &[(&str, &[&str])] = &[
    ("locations", codec::LOCATION_KEYS),
    ("calls", codec::CALL_KEYS),
    ("resources", codec::RESOURCE_KEYS),
    ("resourceStatuses", codec::STATUS_KEYS),
    ("notes", codec::NOTE_KEYS),
    ("persons", codec::PERSON_KEYS),
];

/// Member names of the incident component.
pub const INCIDENT_FIELDS: &[&str] = codec::INCIDENT_KEYS;

/// Member names an item of the given component list may carry.
pub fn component_keys(list: &str) -> Option<&'static [&'static str]> {
    COMPONENT_LISTS.iter().find(|(name, _)| *name == list).map(|(_, keys)| *keys)
}

/// Whether `path` names a schema field: `incident`, `incident.<field>`,
/// `sourceDescriptor`, `<list>` or `<list>.<field>`.
pub fn is_known_field_path(path: &str) -> bool {
    let (head, tail) = match path.split_once('.') {
        Some((h, t)) => (h, Some(t)),
        None => (path, None),
    };
    match (head, tail) {
        ("incident", None) | ("sourceDescriptor", None) => true,
        ("incident", Some(f)) => codec::INCIDENT_KEYS.contains(&f),
        (list, f) => COMPONENT_LISTS
            .iter()
            .find(|(name, _)| *name == list)
            .is_some_and(|(_, keys)| f.is_none_or(|f| keys.contains(&f))),
    }
}

/// Unknown members carried through parse and serialize untouched.
pub type Extras = BTreeMap<String, Value>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid timestamp at {path}: {value:?}")]
    Timestamp { path: String, value: String },
    #[error("dangling reference at {path}: no {target} with id {id:?}")]
    DanglingReference { path: String, target: &'static str, id: String },
    #[error("duplicate id at {path}: {id:?}")]
    DuplicateId { path: String, id: String },
    #[error("unknown registry term at {path}: {term:?}")]
    UnknownRegistryTerm { path: String, term: String },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}

impl ModelError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Schema { path: path.into(), message: message.into() }
    }

    /// The JSON path the error points at, when it has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ModelError::Schema { path, .. }
            | ModelError::Timestamp { path, .. }
            | ModelError::DanglingReference { path, .. }
            | ModelError::DuplicateId { path, .. }
            | ModelError::UnknownRegistryTerm { path, .. } => Some(path),
            ModelError::Json(_) | ModelError::Vocabulary(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IncidentStatus {
    Open,
    Active,
    Closed,
    Unknown,
}

impl IncidentStatus {
    pub const ALL: [IncidentStatus; 4] =
        [IncidentStatus::Open, IncidentStatus::Active, IncidentStatus::Closed, IncidentStatus::Unknown];

    pub fn as_str(&self) -> &'static str {
        match self {
            IncidentStatus::Open => "open",
            IncidentStatus::Active => "active",
            IncidentStatus::Closed => "closed",
            IncidentStatus::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitStatus {
    Dispatched,
    Enroute,
    OnScene,
    Cleared,
    Available,
    Unknown,
}

impl UnitStatus {
    pub const ALL: [UnitStatus; 6] = [
        UnitStatus::Dispatched,
        UnitStatus::Enroute,
        UnitStatus::OnScene,
        UnitStatus::Cleared,
        UnitStatus::Available,
        UnitStatus::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            UnitStatus::Dispatched => "dispatched",
            UnitStatus::Enroute => "enroute",
            UnitStatus::OnScene => "on-scene",
            UnitStatus::Cleared => "cleared",
            UnitStatus::Available => "available",
            UnitStatus::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncidentComponent {
    pub incident_type: Option<String>,
    /// 1 (most urgent) ..= 5.
    pub priority: Option<u8>,
    pub status: Option<IncidentStatus>,
    pub disposition: Option<String>,
    pub tracking_id: Option<String>,
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocationComponent {
    pub location_id: String,
    pub geometry: Option<Geometry>,
    pub civic_address: Option<String>,
    pub description: Option<String>,
    /// Reliability of a geocoded resolution, in `[0, 1]`.
    pub confidence: Option<f64>,
    pub extras: Extras,
}

impl LocationComponent {
    /// Text the geocoder should try when no geometry is present.
    pub fn place_text(&self) -> Option<&str> {
        self.description.as_deref().or(self.civic_address.as_deref()).filter(|s| !s.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallComponent {
    pub call_id: String,
    pub start: Timestamp,
    pub source_text: Option<String>,
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceComponent {
    pub resource_id: String,
    pub unit_identifier: String,
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceStatusComponent {
    pub status_id: String,
    pub resource_id: String,
    pub status: UnitStatus,
    pub status_time: Timestamp,
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotesComponent {
    pub note_id: String,
    pub comments: String,
    pub timestamp: Timestamp,
    pub location_ref: Option<String>,
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonComponent {
    pub person_id: String,
    pub role_text: String,
    pub name_text: Option<String>,
    pub extras: Extras,
}

/// One EIDO-JSON snapshot of an incident, as issued by one source.
#[derive(Debug, Clone, PartialEq)]
pub struct EidoDocument {
    pub eido_id: String,
    pub issued: Timestamp,
    pub source_descriptor: Option<String>,
    pub incident: IncidentComponent,
    pub locations: Vec<LocationComponent>,
    pub calls: Vec<CallComponent>,
    pub resources: Vec<ResourceComponent>,
    pub resource_statuses: Vec<ResourceStatusComponent>,
    pub notes: Vec<NotesComponent>,
    pub persons: Vec<PersonComponent>,
    pub extras: Extras,
}

impl EidoDocument {
    /// A document with only the mandatory members set.
    pub fn new(eido_id: impl Into<String>, issued: Timestamp) -> Self {
        Self {
            eido_id: eido_id.into(),
            issued,
            source_descriptor: None,
            incident: IncidentComponent::default(),
            locations: Vec::new(),
            calls: Vec::new(),
            resources: Vec::new(),
            resource_statuses: Vec::new(),
            notes: Vec::new(),
            persons: Vec::new(),
            extras: Extras::new(),
        }
    }

    /// Unit identifiers referenced by this document's resources.
    pub fn unit_refs(&self) -> impl Iterator<Item = &str> {
        self.resources.iter().map(|r| r.unit_identifier.as_str())
    }

    pub fn geometries(&self) -> impl Iterator<Item = &Geometry> {
        self.locations.iter().filter_map(|l| l.geometry.as_ref())
    }
}

/// The text that stands for a document in semantic comparison.
///
/// Order: registry type, disposition, notes by ascending timestamp (stable),
/// then each location's civic address and description. Parts are joined by a
/// single space; empty parts are skipped.
pub fn descriptive_text(doc: &EidoDocument) -> String {
    let mut parts: Vec<&str> = Vec::new();
    parts.extend(doc.incident.incident_type.as_deref());
    parts.extend(doc.incident.disposition.as_deref());
    let mut notes: Vec<&NotesComponent> = doc.notes.iter().collect();
    notes.sort_by(|a, b| a.timestamp.cmp_instant(&b.timestamp));
    parts.extend(notes.iter().map(|n| n.comments.as_str()));
    for loc in &doc.locations {
        parts.extend(loc.civic_address.as_deref());
        parts.extend(loc.description.as_deref());
    }
    parts.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
}
