//! Flat feature rows: one per document component, with identifier columns
//! carrying the links between components.
//!
//! Cells hold strings. Schema strings are copied as they are; numbers and
//! geometry hold their canonical JSON text; extension members go in
//! `extra.<name>` columns (and `document.<name>` on the incident row for
//! top-level ones) as canonical JSON text. An absent cell means an absent
//! field.

mod io;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{document_from_value, document_to_value, EidoDocument, ModelError, Validator};

pub use io::{
    export_dir, import_path, read_csv, read_jsonl, write_csv, write_jsonl, Manifest, ManifestFile, MANIFEST_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Incident,
    Location,
    Person,
    Resource,
    ResourceStatus,
    Call,
    Note,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Incident,
        FeatureKind::Location,
        FeatureKind::Person,
        FeatureKind::Resource,
        FeatureKind::ResourceStatus,
        FeatureKind::Call,
        FeatureKind::Note,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Incident => "incident",
            FeatureKind::Location => "location",
            FeatureKind::Person => "person",
            FeatureKind::Resource => "resource",
            FeatureKind::ResourceStatus => "resourceStatus",
            FeatureKind::Call => "call",
            FeatureKind::Note => "note",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Document member holding this kind's list, and the id member.
    fn list_and_id(&self) -> Option<(&'static str, &'static str)> {
        match self {
            FeatureKind::Incident => None,
            FeatureKind::Location => Some(("locations", "locationId")),
            FeatureKind::Person => Some(("persons", "personId")),
            FeatureKind::Resource => Some(("resources", "resourceId")),
            FeatureKind::ResourceStatus => Some(("resourceStatuses", "resourceStatusId")),
            FeatureKind::Call => Some(("calls", "callId")),
            FeatureKind::Note => Some(("notes", "noteId")),
        }
    }

    /// Columns that name another component of the same document.
    pub fn link_columns(&self) -> &'static [(&'static str, FeatureKind)] {
        match self {
            FeatureKind::ResourceStatus => &[("referencedResourceId", FeatureKind::Resource)],
            FeatureKind::Note => &[("locationReference", FeatureKind::Location)],
            _ => &[],
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const INCIDENT_COMPONENT_ID: &str = "incident-1";
pub const EXTRA_PREFIX: &str = "extra.";
pub const DOCUMENT_PREFIX: &str = "document.";

/// Schema members whose cells hold JSON text rather than a plain string.
const JSON_COLUMNS: &[&str] = &["incidentCommonPriorityNumber", "confidence", "geometry"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRow {
    pub kind: FeatureKind,
    pub eido_id: String,
    /// Empty means "assign one when composing".
    pub component_id: String,
    pub attributes: BTreeMap<String, String>,
}

impl FeatureRow {
    /// `(column, target kind, referenced id)` for each link cell present.
    pub fn links(&self) -> impl Iterator<Item = (&'static str, FeatureKind, &str)> {
        self.kind
            .link_columns()
            .iter()
            .filter_map(|(col, target)| self.attributes.get(*col).map(|v| (*col, *target, v.as_str())))
    }
}

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("{eido_id}: {kind} {component_id} has conflicting values for {column}: {first:?} vs {second:?}")]
    Conflict { eido_id: String, kind: FeatureKind, component_id: String, column: String, first: String, second: String },
    #[error("{eido_id}: {kind} {component_id} column {column} references missing {target} {id:?}")]
    DanglingLink {
        eido_id: String,
        kind: FeatureKind,
        component_id: String,
        column: String,
        target: FeatureKind,
        id: String,
    },
    #[error("{eido_id}: no incident row")]
    MissingIncidentRow { eido_id: String },
    #[error("{eido_id}: {kind} {component_id} column {column}: {message}")]
    BadCell { eido_id: String, kind: FeatureKind, component_id: String, column: String, message: String },
    #[error("{eido_id}: composed document is invalid: {source}")]
    Invalid { eido_id: String, source: ModelError },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One row per component plus the incident row, in document order.
pub fn flatten(doc: &EidoDocument) -> Vec<FeatureRow> {
    let value = document_to_value(doc);
    let top = value.as_object().expect("documents encode as objects");
    let mut rows = Vec::new();

    let mut attrs = BTreeMap::new();
    let incident = top["incident"].as_object().expect("incident encodes as an object");
    put_component_cells(&mut attrs, incident, crate::model::INCIDENT_FIELDS);
    for (k, v) in top {
        match k.as_str() {
            "eidoId" | "incident" | "locations" | "calls" | "resources" | "resourceStatuses" | "notes" | "persons" => {}
            "issuedTimestamp" | "sourceDescriptor" => {
                attrs.insert(k.clone(), cell(v));
            }
            _ => {
                attrs.insert(format!("{DOCUMENT_PREFIX}{k}"), v.to_string());
            }
        }
    }
    rows.push(FeatureRow {
        kind: FeatureKind::Incident,
        eido_id: doc.eido_id.clone(),
        component_id: INCIDENT_COMPONENT_ID.into(),
        attributes: attrs,
    });

    for kind in &FeatureKind::ALL[1..] {
        let (list, id_key) = kind.list_and_id().expect("component kinds have lists");
        let known = crate::model::component_keys(list).expect("known list");
        for item in top[list].as_array().expect("lists encode as arrays") {
            let obj = item.as_object().expect("components encode as objects");
            let mut attrs = BTreeMap::new();
            put_component_cells(&mut attrs, obj, known);
            let component_id = attrs.remove(id_key).unwrap_or_default();
            rows.push(FeatureRow { kind: *kind, eido_id: doc.eido_id.clone(), component_id, attributes: attrs });
        }
    }
    rows
}

fn put_component_cells(attrs: &mut BTreeMap<String, String>, obj: &Map<String, Value>, known: &[&str]) {
    for (k, v) in obj {
        if known.contains(&k.as_str()) {
            attrs.insert(k.clone(), cell(v));
        } else {
            attrs.insert(format!("{EXTRA_PREFIX}{k}"), v.to_string());
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Rows of many documents, concatenated in order.
pub fn flatten_all<'a>(docs: impl IntoIterator<Item = &'a EidoDocument>) -> Vec<FeatureRow> {
    docs.into_iter().flat_map(flatten).collect()
}

/// Builds one validated document per distinct eidoId, in order of first
/// appearance. Rows sharing `(kind, componentId)` within a document merge;
/// rows without a componentId get `<kind>-<n>`.
pub fn compose(rows: &[FeatureRow], validator: &Validator) -> Result<Vec<EidoDocument>, TabularError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&FeatureRow>> = HashMap::new();
    for r in rows {
        groups
            .entry(r.eido_id.as_str())
            .or_insert_with(|| {
                order.push(r.eido_id.as_str());
                Vec::new()
            })
            .push(r);
    }
    order.into_iter().map(|id| compose_one(id, &groups[id], validator)).collect()
}

struct Component {
    id: String,
    attrs: BTreeMap<String, String>,
}

fn compose_one(eido_id: &str, rows: &[&FeatureRow], validator: &Validator) -> Result<EidoDocument, TabularError> {
    // merge rows into components, keeping first-appearance order per kind
    let mut by_kind: BTreeMap<FeatureKind, Vec<Component>> = BTreeMap::new();
    let explicit: HashSet<(FeatureKind, &str)> =
        rows.iter().filter(|r| !r.component_id.is_empty()).map(|r| (r.kind, r.component_id.as_str())).collect();
    for r in rows {
        let comps = by_kind.entry(r.kind).or_default();
        let id = if r.kind == FeatureKind::Incident {
            INCIDENT_COMPONENT_ID.to_string()
        } else if r.component_id.is_empty() {
            generate_id(r.kind, comps, &explicit)
        } else {
            r.component_id.clone()
        };
        let pos = match comps.iter().position(|c| c.id == id) {
            Some(p) => p,
            None => {
                comps.push(Component { id: id.clone(), attrs: BTreeMap::new() });
                comps.len() - 1
            }
        };
        let target = &mut comps[pos].attrs;
        for (col, val) in &r.attributes {
            match target.get(col) {
                Some(prev) if prev != val => {
                    return Err(TabularError::Conflict {
                        eido_id: eido_id.into(),
                        kind: r.kind,
                        component_id: id,
                        column: col.clone(),
                        first: prev.clone(),
                        second: val.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    target.insert(col.clone(), val.clone());
                }
            }
        }
    }

    for (kind, comps) in &by_kind {
        for c in comps {
            for (col, target) in kind.link_columns() {
                if let Some(id) = c.attrs.get(*col) {
                    let found = by_kind.get(target).is_some_and(|t| t.iter().any(|x| &x.id == id));
                    if !found {
                        return Err(TabularError::DanglingLink {
                            eido_id: eido_id.into(),
                            kind: *kind,
                            component_id: c.id.clone(),
                            column: (*col).into(),
                            target: *target,
                            id: id.clone(),
                        });
                    }
                }
            }
        }
    }

    let incident = by_kind
        .get(&FeatureKind::Incident)
        .and_then(|v| v.first())
        .ok_or_else(|| TabularError::MissingIncidentRow { eido_id: eido_id.into() })?;
    let bad = |kind: FeatureKind, comp: &str, column: &str, message: String| TabularError::BadCell {
        eido_id: eido_id.into(),
        kind,
        component_id: comp.into(),
        column: column.into(),
        message,
    };

    let mut top = Map::new();
    top.insert("eidoId".into(), Value::String(eido_id.into()));
    let mut inc = Map::new();
    for (col, val) in &incident.attrs {
        if let Some(k) = col.strip_prefix(DOCUMENT_PREFIX) {
            let v =
                serde_json::from_str(val).map_err(|e| bad(FeatureKind::Incident, &incident.id, col, e.to_string()))?;
            top.insert(k.into(), v);
        } else if col == "issuedTimestamp" || col == "sourceDescriptor" {
            top.insert(col.clone(), Value::String(val.clone()));
        } else {
            let v = decode_cell(col, val).map_err(|m| bad(FeatureKind::Incident, &incident.id, col, m))?;
            inc.insert(col.strip_prefix(EXTRA_PREFIX).unwrap_or(col).into(), v);
        }
    }
    top.insert("incident".into(), Value::Object(inc));

    for kind in &FeatureKind::ALL[1..] {
        let (list, id_key) = kind.list_and_id().expect("component kinds have lists");
        let mut items = Vec::new();
        for c in by_kind.get(kind).map(Vec::as_slice).unwrap_or(&[]) {
            let mut obj = Map::new();
            obj.insert(id_key.into(), Value::String(c.id.clone()));
            for (col, val) in &c.attrs {
                if col == id_key {
                    if val != &c.id {
                        return Err(bad(*kind, &c.id, col, format!("disagrees with componentId: {val:?}")));
                    }
                    continue;
                }
                let v = decode_cell(col, val).map_err(|m| bad(*kind, &c.id, col, m))?;
                obj.insert(col.strip_prefix(EXTRA_PREFIX).unwrap_or(col).into(), v);
            }
            items.push(Value::Object(obj));
        }
        top.insert(list.into(), Value::Array(items));
    }

    let value = Value::Object(top);
    let invalid = |source| TabularError::Invalid { eido_id: eido_id.into(), source };
    let doc = document_from_value(&value).map_err(invalid)?;
    validator.validate(&doc).map_err(invalid)?;
    Ok(doc)
}

fn decode_cell(column: &str, cell: &str) -> Result<Value, String> {
    if column.starts_with(EXTRA_PREFIX) || JSON_COLUMNS.contains(&column) {
        serde_json::from_str(cell).map_err(|e| format!("expected JSON text: {e}"))
    } else {
        Ok(Value::String(cell.into()))
    }
}

fn generate_id(kind: FeatureKind, existing: &[Component], explicit: &HashSet<(FeatureKind, &str)>) -> String {
    let mut n = existing.len() + 1;
    loop {
        let id = format!("{}-{n}", kind.as_str());
        if !explicit.contains(&(kind, id.as_str())) && !existing.iter().any(|c| c.id == id) {
            return id;
        }
        n += 1;
    }
}
