use std::collections::HashSet;
use std::sync::Arc;

use serde_json::Value;

use super::codec::{
    document_from_value, CALL_KEYS, DOCUMENT_KEYS, INCIDENT_KEYS, LOCATION_KEYS, NOTE_KEYS, PERSON_KEYS, RESOURCE_KEYS,
    STATUS_KEYS,
};
use super::{EidoDocument, Extras, ModelError, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationWarning {
    UnknownRegistryTerm { path: String, term: String },
}

impl std::fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationWarning::UnknownRegistryTerm { path, term } => {
                write!(f, "{path}: {term:?} is not in the registry vocabulary")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub document: EidoDocument,
    pub warnings: Vec<ValidationWarning>,
}

/// Checks every document invariant. In strict mode a registry miss is an
/// error; otherwise it is reported as a warning.
#[derive(Debug, Clone)]
pub struct Validator {
    vocabulary: Arc<Vocabulary>,
    strict: bool,
}

impl Validator {
    pub fn new(vocabulary: Arc<Vocabulary>, strict: bool) -> Self {
        Self { vocabulary, strict }
    }

    /// Bundled vocabulary, lenient.
    pub fn lenient() -> Self {
        Self::new(Arc::new(Vocabulary::bundled()), false)
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocabulary
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn parse(&self, text: &str) -> Result<Parsed, ModelError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        self.parse_value(&value)
    }

    pub fn parse_value(&self, value: &Value) -> Result<Parsed, ModelError> {
        let document = document_from_value(value)?;
        let warnings = self.validate(&document)?;
        Ok(Parsed { document, warnings })
    }

    pub fn validate(&self, doc: &EidoDocument) -> Result<Vec<ValidationWarning>, ModelError> {
        let mut warnings = Vec::new();
        if doc.eido_id.trim().is_empty() {
            return Err(ModelError::schema("eidoId", "must be non-empty"));
        }
        check_extras("", &doc.extras, DOCUMENT_KEYS)?;

        let inc = &doc.incident;
        check_extras("incident", &inc.extras, INCIDENT_KEYS)?;
        if let Some(p) = inc.priority {
            if !(1..=5).contains(&p) {
                return Err(ModelError::schema(
                    "incident.incidentCommonPriorityNumber",
                    "priority must be an integer in 1..=5",
                ));
            }
        }
        if let Some(term) = &inc.incident_type {
            if !self.vocabulary.contains(term) {
                let path = "incident.incidentTypeCommonRegistryText".to_string();
                if self.strict {
                    return Err(ModelError::UnknownRegistryTerm { path, term: term.clone() });
                }
                warnings.push(ValidationWarning::UnknownRegistryTerm { path, term: term.clone() });
            }
        }

        let location_ids = unique_ids("locations", doc.locations.iter().map(|l| l.location_id.as_str()))?;
        for (i, loc) in doc.locations.iter().enumerate() {
            let path = format!("locations[{i}]");
            check_extras(&path, &loc.extras, LOCATION_KEYS)?;
            if loc.geometry.is_none() && loc.civic_address.is_none() && loc.description.is_none() {
                return Err(ModelError::schema(
                    path,
                    "location needs geometry, civicAddressText or locationDescriptionText",
                ));
            }
            if let Some(g) = &loc.geometry {
                g.validate().map_err(|e| ModelError::schema(format!("{path}.geometry"), e.to_string()))?;
            }
            if let Some(c) = loc.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(ModelError::schema(format!("{path}.confidence"), "must lie in [0, 1]"));
                }
            }
        }

        unique_ids("calls", doc.calls.iter().map(|c| c.call_id.as_str()))?;
        for (i, c) in doc.calls.iter().enumerate() {
            check_extras(&format!("calls[{i}]"), &c.extras, CALL_KEYS)?;
        }

        let resource_ids = unique_ids("resources", doc.resources.iter().map(|r| r.resource_id.as_str()))?;
        for (i, r) in doc.resources.iter().enumerate() {
            let path = format!("resources[{i}]");
            check_extras(&path, &r.extras, RESOURCE_KEYS)?;
            if r.unit_identifier.trim().is_empty() {
                return Err(ModelError::schema(format!("{path}.unitIdentifier"), "must be non-empty"));
            }
        }

        unique_ids("resourceStatuses", doc.resource_statuses.iter().map(|s| s.status_id.as_str()))?;
        for (i, s) in doc.resource_statuses.iter().enumerate() {
            let path = format!("resourceStatuses[{i}]");
            check_extras(&path, &s.extras, STATUS_KEYS)?;
            if !resource_ids.contains(s.resource_id.as_str()) {
                return Err(ModelError::DanglingReference {
                    path: format!("{path}.referencedResourceId"),
                    target: "resource",
                    id: s.resource_id.clone(),
                });
            }
        }

        unique_ids("notes", doc.notes.iter().map(|n| n.note_id.as_str()))?;
        for (i, n) in doc.notes.iter().enumerate() {
            let path = format!("notes[{i}]");
            check_extras(&path, &n.extras, NOTE_KEYS)?;
            if n.comments.trim().is_empty() {
                return Err(ModelError::schema(format!("{path}.notesActionComments"), "must be non-empty"));
            }
            if let Some(r) = &n.location_ref {
                if !location_ids.contains(r.as_str()) {
                    return Err(ModelError::DanglingReference {
                        path: format!("{path}.locationReference"),
                        target: "location",
                        id: r.clone(),
                    });
                }
            }
        }

        unique_ids("persons", doc.persons.iter().map(|p| p.person_id.as_str()))?;
        for (i, p) in doc.persons.iter().enumerate() {
            check_extras(&format!("persons[{i}]"), &p.extras, PERSON_KEYS)?;
        }
        Ok(warnings)
    }
}

fn unique_ids<'a>(list: &str, ids: impl Iterator<Item = &'a str>) -> Result<HashSet<&'a str>, ModelError> {
    let mut seen = HashSet::new();
    for (i, id) in ids.enumerate() {
        if id.trim().is_empty() {
            return Err(ModelError::schema(format!("{list}[{i}]"), "component id must be non-empty"));
        }
        if !seen.insert(id) {
            return Err(ModelError::DuplicateId { path: format!("{list}[{i}]"), id: id.to_string() });
        }
    }
    Ok(seen)
}

fn check_extras(path: &str, extras: &Extras, known: &[&str]) -> Result<(), ModelError> {
    match extras.keys().find(|k| known.contains(&k.as_str())) {
        Some(k) => Err(ModelError::schema(
            if path.is_empty() { k.clone() } else { format!("{path}.{k}") },
            "extras member shadows a schema field",
        )),
        None => Ok(()),
    }
}
