use serde_json::{Map, Number, Value};

use super::{
    CallComponent, EidoDocument, Extras, Geometry, IncidentComponent, IncidentStatus, LocationComponent, ModelError,
    NotesComponent, PersonComponent, ResourceComponent, ResourceStatusComponent, Timestamp, UnitStatus, Validator,
};

/// Parses and validates with the bundled vocabulary in lenient mode.
pub fn parse_document(text: &str) -> Result<EidoDocument, ModelError> {
    Validator::lenient().parse(text).map(|p| p.document)
}

/// Canonical JSON: keys sorted, compact, timestamps in their original offset.
pub fn serialize_document(doc: &EidoDocument) -> String {
    // serde_json's default map is ordered, so this is already key-sorted.
    serde_json::to_string(&document_to_value(doc)).expect("document values are finite")
}

pub fn document_to_value(doc: &EidoDocument) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "eidoId", &doc.eido_id);
    put_str(&mut m, "issuedTimestamp", &doc.issued.to_string());
    put_opt(&mut m, "sourceDescriptor", doc.source_descriptor.as_deref());
    m.insert("incident".into(), incident_to_value(&doc.incident));
    put_list(&mut m, "locations", &doc.locations, location_to_value);
    put_list(&mut m, "calls", &doc.calls, call_to_value);
    put_list(&mut m, "resources", &doc.resources, resource_to_value);
    put_list(&mut m, "resourceStatuses", &doc.resource_statuses, status_to_value);
    put_list(&mut m, "notes", &doc.notes, note_to_value);
    put_list(&mut m, "persons", &doc.persons, person_to_value);
    merge_extras(m, &doc.extras)
}

fn incident_to_value(c: &IncidentComponent) -> Value {
    let mut m = Map::new();
    put_opt(&mut m, "incidentTypeCommonRegistryText", c.incident_type.as_deref());
    if let Some(p) = c.priority {
        m.insert("incidentCommonPriorityNumber".into(), Value::Number(p.into()));
    }
    put_opt(&mut m, "incidentStatus", c.status.map(|s| s.as_str()));
    put_opt(&mut m, "incidentDispositionText", c.disposition.as_deref());
    put_opt(&mut m, "incidentTrackingId", c.tracking_id.as_deref());
    merge_extras(m, &c.extras)
}

pub fn location_to_value(c: &LocationComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "locationId", &c.location_id);
    if let Some(g) = &c.geometry {
        m.insert("geometry".into(), g.to_json());
    }
    put_opt(&mut m, "civicAddressText", c.civic_address.as_deref());
    put_opt(&mut m, "locationDescriptionText", c.description.as_deref());
    if let Some(conf) = c.confidence.and_then(Number::from_f64) {
        m.insert("confidence".into(), Value::Number(conf));
    }
    merge_extras(m, &c.extras)
}

fn call_to_value(c: &CallComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "callId", &c.call_id);
    put_str(&mut m, "callStartTimestamp", &c.start.to_string());
    put_opt(&mut m, "callSourceText", c.source_text.as_deref());
    merge_extras(m, &c.extras)
}

fn resource_to_value(c: &ResourceComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "resourceId", &c.resource_id);
    put_str(&mut m, "unitIdentifier", &c.unit_identifier);
    merge_extras(m, &c.extras)
}

fn status_to_value(c: &ResourceStatusComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "resourceStatusId", &c.status_id);
    put_str(&mut m, "referencedResourceId", &c.resource_id);
    put_str(&mut m, "statusText", c.status.as_str());
    put_str(&mut m, "statusTime", &c.status_time.to_string());
    merge_extras(m, &c.extras)
}

fn note_to_value(c: &NotesComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "noteId", &c.note_id);
    put_str(&mut m, "notesActionComments", &c.comments);
    put_str(&mut m, "noteTimestamp", &c.timestamp.to_string());
    put_opt(&mut m, "locationReference", c.location_ref.as_deref());
    merge_extras(m, &c.extras)
}

fn person_to_value(c: &PersonComponent) -> Value {
    let mut m = Map::new();
    put_str(&mut m, "personId", &c.person_id);
    put_str(&mut m, "roleText", &c.role_text);
    put_opt(&mut m, "nameText", c.name_text.as_deref());
    merge_extras(m, &c.extras)
}

fn put_str(m: &mut Map<String, Value>, key: &str, v: &str) {
    m.insert(key.into(), Value::String(v.into()));
}

fn put_opt(m: &mut Map<String, Value>, key: &str, v: Option<&str>) {
    if let Some(v) = v {
        put_str(m, key, v);
    }
}

fn put_list<T>(m: &mut Map<String, Value>, key: &str, items: &[T], f: fn(&T) -> Value) {
    m.insert(key.into(), Value::Array(items.iter().map(f).collect()));
}

fn merge_extras(mut m: Map<String, Value>, extras: &Extras) -> Value {
    for (k, v) in extras {
        m.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Value::Object(m)
}

/// Member names of each object, used to split known fields from extras.
pub(crate) const DOCUMENT_KEYS: &[&str] = &[
    "eidoId",
    "issuedTimestamp",
    "sourceDescriptor",
    "incident",
    "locations",
    "calls",
    "resources",
    "resourceStatuses",
    "notes",
    "persons",
];
pub(crate) const INCIDENT_KEYS: &[&str] = &[
    "incidentTypeCommonRegistryText",
    "incidentCommonPriorityNumber",
    "incidentStatus",
    "incidentDispositionText",
    "incidentTrackingId",
];
pub(crate) const LOCATION_KEYS: &[&str] =
    &["locationId", "geometry", "civicAddressText", "locationDescriptionText", "confidence"];
pub(crate) const CALL_KEYS: &[&str] = &["callId", "callStartTimestamp", "callSourceText"];
pub(crate) const RESOURCE_KEYS: &[&str] = &["resourceId", "unitIdentifier"];
pub(crate) const STATUS_KEYS: &[&str] = &["resourceStatusId", "referencedResourceId", "statusText", "statusTime"];
pub(crate) const NOTE_KEYS: &[&str] = &["noteId", "notesActionComments", "noteTimestamp", "locationReference"];
pub(crate) const PERSON_KEYS: &[&str] = &["personId", "roleText", "nameText"];

/// Object reader that tracks the JSON path for error messages.
struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    known: &'static [&'static str],
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, path: String, known: &'static [&'static str]) -> Result<Self, ModelError> {
        match value {
            Value::Object(map) => Ok(Self { path, map, known }),
            _ => Err(ModelError::schema(path, "expected an object")),
        }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    /// Present, non-null member.
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn opt_str(&self, key: &str) -> Result<Option<String>, ModelError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ModelError::schema(self.at(key), "expected a string")),
        }
    }

    fn req_str(&self, key: &str) -> Result<String, ModelError> {
        self.opt_str(key)?.ok_or_else(|| ModelError::schema(self.at(key), "required member is missing"))
    }

    fn opt_timestamp(&self, key: &str) -> Result<Option<Timestamp>, ModelError> {
        self.opt_str(key)?
            .map(|s| Timestamp::parse(&s).map_err(|_| ModelError::Timestamp { path: self.at(key), value: s }))
            .transpose()
    }

    fn req_timestamp(&self, key: &str) -> Result<Timestamp, ModelError> {
        self.opt_timestamp(key)?.ok_or_else(|| ModelError::schema(self.at(key), "required member is missing"))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, ModelError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| ModelError::schema(self.at(key), "expected a number")),
        }
    }

    fn list<T>(&self, key: &str, decode: fn(&Value, String) -> Result<T, ModelError>) -> Result<Vec<T>, ModelError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => {
                items.iter().enumerate().map(|(i, v)| decode(v, format!("{}[{i}]", self.at(key)))).collect()
            }
            Some(_) => Err(ModelError::schema(self.at(key), "expected an array")),
        }
    }

    fn extras(&self) -> Extras {
        self.map
            .iter()
            .filter(|(k, _)| !self.known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Structural decode only; invariants are checked by [`Validator`].
pub fn document_from_value(value: &Value) -> Result<EidoDocument, ModelError> {
    let f = Fields::new(value, String::new(), DOCUMENT_KEYS)?;
    let incident = match f.get("incident") {
        Some(v) => decode_incident(v, "incident".into())?,
        None => return Err(ModelError::schema("incident", "required member is missing")),
    };
    Ok(EidoDocument {
        eido_id: f.req_str("eidoId")?,
        issued: f.req_timestamp("issuedTimestamp")?,
        source_descriptor: f.opt_str("sourceDescriptor")?,
        incident,
        locations: f.list("locations", decode_location)?,
        calls: f.list("calls", decode_call)?,
        resources: f.list("resources", decode_resource)?,
        resource_statuses: f.list("resourceStatuses", decode_status)?,
        notes: f.list("notes", decode_note)?,
        persons: f.list("persons", decode_person)?,
        extras: f.extras(),
    })
}

fn decode_incident(v: &Value, path: String) -> Result<IncidentComponent, ModelError> {
    let f = Fields::new(v, path, INCIDENT_KEYS)?;
    let priority = match f.get("incidentCommonPriorityNumber") {
        None => None,
        Some(p) => match p.as_u64() {
            Some(n @ 1..=5) => Some(n as u8),
            _ => {
                return Err(ModelError::schema(
                    f.at("incidentCommonPriorityNumber"),
                    "priority must be an integer in 1..=5",
                ))
            }
        },
    };
    let status = match f.opt_str("incidentStatus")? {
        None => None,
        Some(s) => Some(
            IncidentStatus::parse(&s)
                .ok_or_else(|| ModelError::schema(f.at("incidentStatus"), format!("unknown status {s:?}")))?,
        ),
    };
    Ok(IncidentComponent {
        incident_type: f.opt_str("incidentTypeCommonRegistryText")?,
        priority,
        status,
        disposition: f.opt_str("incidentDispositionText")?,
        tracking_id: f.opt_str("incidentTrackingId")?,
        extras: f.extras(),
    })
}

fn decode_location(v: &Value, path: String) -> Result<LocationComponent, ModelError> {
    let f = Fields::new(v, path, LOCATION_KEYS)?;
    let geometry = f
        .get("geometry")
        .map(|g| Geometry::from_json(g).map_err(|e| ModelError::schema(f.at("geometry"), e.to_string())))
        .transpose()?;
    Ok(LocationComponent {
        location_id: f.req_str("locationId")?,
        geometry,
        civic_address: f.opt_str("civicAddressText")?,
        description: f.opt_str("locationDescriptionText")?,
        confidence: f.opt_f64("confidence")?,
        extras: f.extras(),
    })
}

fn decode_call(v: &Value, path: String) -> Result<CallComponent, ModelError> {
    let f = Fields::new(v, path, CALL_KEYS)?;
    Ok(CallComponent {
        call_id: f.req_str("callId")?,
        start: f.req_timestamp("callStartTimestamp")?,
        source_text: f.opt_str("callSourceText")?,
        extras: f.extras(),
    })
}

fn decode_resource(v: &Value, path: String) -> Result<ResourceComponent, ModelError> {
    let f = Fields::new(v, path, RESOURCE_KEYS)?;
    Ok(ResourceComponent {
        resource_id: f.req_str("resourceId")?,
        unit_identifier: f.req_str("unitIdentifier")?,
        extras: f.extras(),
    })
}

fn decode_status(v: &Value, path: String) -> Result<ResourceStatusComponent, ModelError> {
    let f = Fields::new(v, path, STATUS_KEYS)?;
    let text = f.req_str("statusText")?;
    let status = UnitStatus::parse(&text)
        .ok_or_else(|| ModelError::schema(f.at("statusText"), format!("unknown status {text:?}")))?;
    Ok(ResourceStatusComponent {
        status_id: f.req_str("resourceStatusId")?,
        resource_id: f.req_str("referencedResourceId")?,
        status,
        status_time: f.req_timestamp("statusTime")?,
        extras: f.extras(),
    })
}

fn decode_note(v: &Value, path: String) -> Result<NotesComponent, ModelError> {
    let f = Fields::new(v, path, NOTE_KEYS)?;
    Ok(NotesComponent {
        note_id: f.req_str("noteId")?,
        comments: f.req_str("notesActionComments")?,
        timestamp: f.req_timestamp("noteTimestamp")?,
        location_ref: f.opt_str("locationReference")?,
        extras: f.extras(),
    })
}

fn decode_person(v: &Value, path: String) -> Result<PersonComponent, ModelError> {
    let f = Fields::new(v, path, PERSON_KEYS)?;
    Ok(PersonComponent {
        person_id: f.req_str("personId")?,
        role_text: f.req_str("roleText")?,
        name_text: f.opt_str("nameText")?,
        extras: f.extras(),
    })
}
