//! Legacy CAD records to EIDO documents.
//!
//! A [`Transformer`] binds CAD columns to roles ([`FieldBindings`]), maps
//! agency codes through a [`MappingRegistry`], synthesizes ISO 8601 instants
//! from split date/time columns, builds unit status components, runs an
//! [`Extractor`] over the problem narrative and finally checks the result
//! against the first matching [`EidoTemplate`]. All reference data lives in
//! files; nothing agency-specific is compiled in except the bundled defaults.

mod extract;
mod registry;
mod template;
mod time;

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::io::Read;
use std::sync::Arc;

use chrono::{Duration, NaiveDate, NaiveDateTime, TimeZone};
use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    parse_utc_offset, CallComponent, EidoDocument, IncidentStatus, LocationComponent, ModelError, NotesComponent,
    PersonComponent, ResourceComponent, ResourceStatusComponent, Timestamp, UnitStatus, ValidationWarning, Validator,
};
use crate::par::{self, Mode};

pub use extract::{Entity, EntityKind, Extractor, NoopExtractor, RuleExtractor};
pub use registry::{CodeKind, Mapping, MappingRegistry};
pub use template::{bundled_templates, parse_templates, select_template, EidoTemplate};
pub use time::{parse_clock, parse_duration, parse_month, synthesize_timestamp, TimestampParts};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("mapping registry: {0}")]
    Registry(String),
    #[error("template: {0}")]
    Template(String),
    #[error("timestamp: {0}")]
    Timestamp(String),
    #[error("input: {0}")]
    Input(String),
    #[error("unmapped {kind} code {code:?}")]
    Unmapped { kind: CodeKind, code: String },
    #[error("bindings: {0}")]
    Bindings(String),
    #[error("generated document is invalid: {0}")]
    Invalid(#[from] ModelError),
}

/// One row of a CAD export: column name to raw value, in column order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CadRecord {
    columns: Vec<(String, String)>,
}

impl CadRecord {
    pub fn new<I, K, V>(pairs: I) -> Result<Self, TransformError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut columns: Vec<(String, String)> = Vec::new();
        for (k, v) in pairs {
            let k = k.into();
            if columns.iter().any(|(c, _)| *c == k) {
                return Err(TransformError::Input(format!("duplicate column {k:?}")));
            }
            columns.push((k, v.into()));
        }
        Ok(Self { columns })
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.columns.iter().find(|(c, _)| c == column).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.columns.iter().map(|(c, v)| (c.as_str(), v.as_str()))
    }

    fn fingerprint(&self) -> u64 {
        let mut sorted: Vec<_> = self.columns.iter().collect();
        sorted.sort();
        let mut h = FnvHasher::default();
        for (k, v) in sorted {
            h.write(k.as_bytes());
            h.write(&[0x1f]);
            h.write(v.as_bytes());
            h.write(&[0x1e]);
        }
        h.finish()
    }
}

/// What a bound CAD column contributes to the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FieldRole {
    IncidentNumber,
    IncidentType,
    Priority,
    Disposition,
    IncidentStatus,
    Year,
    Month,
    Day,
    Hour,
    Minute,
    Second,
    UtcOffset,
    CallTimestamp,
    SectorBeat,
    CivicAddress,
    LocationDescription,
    UnitIdentifier,
    FirstUnitArrived,
    UnitTimeOnScene,
    ProblemDescription,
    CallSource,
    SourceDescriptor,
}

/// Column-to-role assignment. Each role may be bound to at most one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldBindings {
    by_role: BTreeMap<FieldRole, String>,
}

impl FieldBindings {
    pub fn from_columns<I, S>(pairs: I) -> Result<Self, TransformError>
    where
        I: IntoIterator<Item = (S, FieldRole)>,
        S: Into<String>,
    {
        let mut by_role = BTreeMap::new();
        for (column, role) in pairs {
            let column = column.into();
            if let Some(prev) = by_role.insert(role, column.clone()) {
                return Err(TransformError::Bindings(format!("role {role:?} bound to both {prev:?} and {column:?}")));
            }
        }
        Ok(Self { by_role })
    }

    pub fn column(&self, role: FieldRole) -> Option<&str> {
        self.by_role.get(&role).map(String::as_str)
    }
}

impl Default for FieldBindings {
    /// Bindings for the conventional legacy column names.
    fn default() -> Self {
        use FieldRole::*;
        Self::from_columns([
            ("Incident Number", IncidentNumber),
            ("Incident Type", IncidentType),
            ("Priority Level", Priority),
            ("Call Disposition", Disposition),
            ("Incident Status", IncidentStatus),
            ("Response Year", Year),
            ("Response Month", Month),
            ("Response Day", Day),
            ("Response Hour", Hour),
            ("Response Minute", Minute),
            ("Response Second", Second),
            ("UTC Offset", UtcOffset),
            ("Call Timestamp", CallTimestamp),
            ("Sector / Beat", SectorBeat),
            ("Address", CivicAddress),
            ("Location", LocationDescription),
            ("First Unit", UnitIdentifier),
            ("First Unit Arrived", FirstUnitArrived),
            ("Unit Time on Scene", UnitTimeOnScene),
            ("Initial Problem Description", ProblemDescription),
            ("Call Source", CallSource),
            ("Source", SourceDescriptor),
        ])
        .expect("default bindings are one-to-one")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "camelCase")]
pub enum TransformWarning {
    MissingRequiredField { template_id: String, path: String },
    UnmappedCode { kind: String, code: String },
    UnknownRegistryTerm { term: String },
    UnparsedValue { column: String, value: String, reason: String },
    NoTemplate,
}

#[derive(Debug, Clone)]
pub struct TransformOptions {
    /// Used when no year column is bound or the cell is empty.
    pub default_year: Option<i32>,
    pub default_utc_offset: String,
    /// Unknown codes become errors instead of unmapped markers.
    pub strict_codes: bool,
    pub source_descriptor: String,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            default_year: None,
            default_utc_offset: "+00:00".into(),
            strict_codes: false,
            source_descriptor: "CAD export".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub document: EidoDocument,
    pub warnings: Vec<TransformWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    pub index: usize,
    pub error: TransformError,
}

#[derive(Clone)]
pub struct Transformer {
    pub registry: Arc<MappingRegistry>,
    pub templates: Arc<Vec<EidoTemplate>>,
    pub extractor: Arc<dyn Extractor>,
    pub bindings: FieldBindings,
    pub validator: Validator,
    pub options: TransformOptions,
}

impl Transformer {
    /// Bundled registry, templates and vocabulary with a gazetteer-free rule extractor.
    pub fn bundled(options: TransformOptions) -> Self {
        let validator = Validator::lenient();
        Self {
            registry: Arc::new(MappingRegistry::bundled(validator.vocabulary())),
            templates: Arc::new(bundled_templates()),
            extractor: Arc::new(RuleExtractor::default()),
            bindings: FieldBindings::default(),
            validator,
            options,
        }
    }

    pub fn map_code(&self, kind: CodeKind, code: &str) -> Mapping {
        self.registry.map_code(kind, code)
    }

    fn cell<'r>(&self, rec: &'r CadRecord, role: FieldRole) -> Option<&'r str> {
        self.bindings.column(role).and_then(|c| rec.get(c)).map(str::trim).filter(|v| !v.is_empty())
    }

    fn column_name(&self, role: FieldRole) -> String {
        self.bindings.column(role).unwrap_or_default().to_string()
    }

    pub fn transform_record(&self, rec: &CadRecord) -> Result<Transformed, TransformError> {
        use FieldRole as R;
        let mut warnings = Vec::new();
        let call_start = self.call_timestamp(rec)?;

        let eido_id = format!("EIDO-{:016x}", rec.fingerprint());
        let mut doc = EidoDocument::new(eido_id, call_start);
        doc.source_descriptor =
            Some(self.cell(rec, R::SourceDescriptor).unwrap_or(&self.options.source_descriptor).to_string());

        // incident component
        doc.incident.tracking_id = self.cell(rec, R::IncidentNumber).map(str::to_string);
        if let Some(code) = self.cell(rec, R::IncidentType) {
            match self.mapped(CodeKind::IncidentType, code, &mut warnings)? {
                Mapping::Term(t) => doc.incident.incident_type = Some(t),
                _ => {
                    doc.incident.extras.insert("unmappedIncidentTypeCode".into(), Value::String(code.into()));
                }
            }
        }
        if let Some(code) = self.cell(rec, R::Priority) {
            match self.mapped(CodeKind::Priority, code, &mut warnings)? {
                Mapping::Priority(p) => doc.incident.priority = Some(p),
                _ => {
                    doc.incident.extras.insert("unmappedPriorityCode".into(), Value::String(code.into()));
                }
            }
        }
        if let Some(code) = self.cell(rec, R::Disposition) {
            match self.mapped(CodeKind::Disposition, code, &mut warnings)? {
                Mapping::Text(t) => doc.incident.disposition = Some(t),
                _ => {
                    doc.incident.extras.insert("unmappedDispositionCode".into(), Value::String(code.into()));
                }
            }
        }
        if let Some(s) = self.cell(rec, R::IncidentStatus) {
            match IncidentStatus::parse(&s.to_lowercase()) {
                Some(st) => doc.incident.status = Some(st),
                None => warnings.push(TransformWarning::UnparsedValue {
                    column: self.column_name(R::IncidentStatus),
                    value: s.into(),
                    reason: "not an incident status".into(),
                }),
            }
        }

        doc.calls.push(CallComponent {
            call_id: "C1".into(),
            start: call_start,
            source_text: Some(self.cell(rec, R::CallSource).unwrap_or("CAD").to_string()),
            extras: Default::default(),
        });

        // primary location; the beat is appended to the description
        let civic = self.cell(rec, R::CivicAddress).map(str::to_string);
        let description_parts: Vec<&str> =
            [self.cell(rec, R::LocationDescription), self.cell(rec, R::SectorBeat)].into_iter().flatten().collect();
        let description = (!description_parts.is_empty()).then(|| description_parts.join("; "));
        let primary_location = if civic.is_some() || description.is_some() {
            doc.locations.push(LocationComponent {
                location_id: "L1".into(),
                civic_address: civic,
                description,
                ..Default::default()
            });
            Some("L1".to_string())
        } else {
            None
        };

        if let Some(narrative) = self.cell(rec, R::ProblemDescription) {
            self.apply_entities(&mut doc, narrative);
            doc.notes.push(NotesComponent {
                note_id: "N1".into(),
                comments: narrative.to_string(),
                timestamp: call_start,
                location_ref: primary_location,
                extras: Default::default(),
            });
        }

        self.apply_units(rec, &mut doc, &mut warnings)?;

        match select_template(&self.templates, doc.incident.incident_type.as_deref()) {
            Some(t) => warnings.extend(
                t.missing_required(&doc)
                    .into_iter()
                    .map(|path| TransformWarning::MissingRequiredField { template_id: t.template_id.clone(), path }),
            ),
            None => warnings.push(TransformWarning::NoTemplate),
        }

        for w in self.validator.validate(&doc)? {
            match w {
                ValidationWarning::UnknownRegistryTerm { term, .. } => {
                    warnings.push(TransformWarning::UnknownRegistryTerm { term })
                }
            }
        }
        Ok(Transformed { document: doc, warnings })
    }

    fn mapped(
        &self,
        kind: CodeKind,
        code: &str,
        warnings: &mut Vec<TransformWarning>,
    ) -> Result<Mapping, TransformError> {
        let m = self.registry.map_code(kind, code);
        if let Mapping::Unmapped { kind, code } = &m {
            if self.options.strict_codes {
                return Err(TransformError::Unmapped { kind: *kind, code: code.clone() });
            }
            warnings.push(TransformWarning::UnmappedCode { kind: kind.to_string(), code: code.clone() });
        }
        Ok(m)
    }

    fn offset_text<'r>(&'r self, rec: &'r CadRecord) -> &'r str {
        self.cell(rec, FieldRole::UtcOffset).unwrap_or(&self.options.default_utc_offset)
    }

    fn call_timestamp(&self, rec: &CadRecord) -> Result<Timestamp, TransformError> {
        use FieldRole as R;
        if let Some(full) = self.cell(rec, R::CallTimestamp) {
            return Timestamp::parse(full)
                .map_err(|_| TransformError::Timestamp(format!("unparseable call timestamp {full:?}")));
        }
        let int = |role: FieldRole| -> Result<Option<u32>, TransformError> {
            self.cell(rec, role)
                .map(|v| {
                    v.parse::<u32>().map_err(|_| {
                        TransformError::Timestamp(format!("{:?} is not a number: {v:?}", self.column_name(role)))
                    })
                })
                .transpose()
        };
        let year = match self.cell(rec, R::Year) {
            Some(y) => {
                Some(y.parse::<i32>().map_err(|_| TransformError::Timestamp(format!("year is not a number: {y:?}")))?)
            }
            None => self.options.default_year,
        };
        let month = self
            .cell(rec, R::Month)
            .map(|m| parse_month(m).ok_or_else(|| TransformError::Timestamp(format!("unrecognised month {m:?}"))))
            .transpose()?;
        let (mut hour, mut minute, mut second) = (None, int(R::Minute)?, int(R::Second)?);
        if let Some(h) = self.cell(rec, R::Hour) {
            let (hh, mm, ss) =
                parse_clock(h).ok_or_else(|| TransformError::Timestamp(format!("unrecognised hour {h:?}")))?;
            hour = Some(hh);
            if h.contains(':') || h.len() == 4 {
                minute = minute.or(Some(mm));
                second = second.or(Some(ss));
            }
        }
        synthesize_timestamp(&TimestampParts {
            year,
            month,
            day: int(R::Day)?,
            hour,
            minute,
            second,
            utc_offset: Some(self.offset_text(rec).to_string()),
        })
    }

    /// Arrival may be a full RFC 3339 instant, a local `YYYY-MM-DD HH:MM[:SS]`
    /// or a bare clock time on the call date (rolled to the next day when it
    /// precedes the call).
    fn arrival_time(&self, rec: &CadRecord, text: &str, call: &Timestamp) -> Option<Timestamp> {
        if let Ok(ts) = Timestamp::parse(text) {
            return Some(ts);
        }
        let offset = parse_utc_offset(self.offset_text(rec))?;
        for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
                return offset.from_local_datetime(&naive).single().map(Timestamp::new);
            }
        }
        let (h, m, s) = parse_clock(text)?;
        let local_date: NaiveDate = call.inner().with_timezone(&offset).date_naive();
        let naive = local_date.and_hms_opt(h, m, s)?;
        let ts = Timestamp::new(offset.from_local_datetime(&naive).single()?);
        Some(if ts < *call { ts.plus(Duration::days(1)) } else { ts })
    }

    fn apply_units(
        &self,
        rec: &CadRecord,
        doc: &mut EidoDocument,
        warnings: &mut Vec<TransformWarning>,
    ) -> Result<(), TransformError> {
        use FieldRole as R;
        let unit = self.cell(rec, R::UnitIdentifier);
        let arrival_text = self.cell(rec, R::FirstUnitArrived);
        let arrival = match arrival_text {
            Some(t) => match self.arrival_time(rec, t, &doc.issued) {
                Some(ts) => Some(ts),
                None => {
                    warnings.push(TransformWarning::UnparsedValue {
                        column: self.column_name(R::FirstUnitArrived),
                        value: t.into(),
                        reason: "not a timestamp or clock time".into(),
                    });
                    None
                }
            },
            None => None,
        };
        let on_scene = self.cell(rec, R::UnitTimeOnScene).and_then(|t| {
            let d = parse_duration(t);
            if d.is_none() {
                warnings.push(TransformWarning::UnparsedValue {
                    column: self.column_name(R::UnitTimeOnScene),
                    value: t.into(),
                    reason: "expected H:MM:SS, '<n> min' or minutes".into(),
                });
            }
            d
        });
        if unit.is_none() && arrival.is_none() {
            return Ok(());
        }
        let unit_id = match unit {
            Some(u) => u.to_string(),
            None => {
                warnings.push(TransformWarning::UnparsedValue {
                    column: self.column_name(R::UnitIdentifier),
                    value: String::new(),
                    reason: "arrival time without a unit identifier".into(),
                });
                "UNIDENTIFIED".to_string()
            }
        };
        doc.resources.push(ResourceComponent {
            resource_id: "R1".into(),
            unit_identifier: unit_id,
            extras: Default::default(),
        });
        if let Some(start) = arrival {
            doc.resource_statuses.push(ResourceStatusComponent {
                status_id: "S1".into(),
                resource_id: "R1".into(),
                status: UnitStatus::OnScene,
                status_time: start,
                extras: Default::default(),
            });
            if let Some(d) = on_scene {
                doc.resource_statuses.push(ResourceStatusComponent {
                    status_id: "S2".into(),
                    resource_id: "R1".into(),
                    status: UnitStatus::Cleared,
                    status_time: start.plus(d),
                    extras: Default::default(),
                });
            }
        } else if on_scene.is_some() {
            warnings.push(TransformWarning::UnparsedValue {
                column: self.column_name(R::UnitTimeOnScene),
                value: self.cell(rec, R::UnitTimeOnScene).unwrap_or_default().into(),
                reason: "time on scene without an arrival time".into(),
            });
        }
        Ok(())
    }

    fn apply_entities(&self, doc: &mut EidoDocument, narrative: &str) {
        let mut orgs = BTreeSet::new();
        let mut known: BTreeSet<String> =
            doc.locations.iter().filter_map(|l| l.description.clone()).map(|d| d.to_lowercase()).collect();
        for e in self.extractor.extract(narrative) {
            match e.kind {
                EntityKind::Location => {
                    if known.insert(e.value.to_lowercase()) {
                        let id = format!("L{}", doc.locations.len() + 1);
                        doc.locations.push(LocationComponent {
                            location_id: id,
                            description: Some(e.value),
                            ..Default::default()
                        });
                    }
                }
                EntityKind::Person => {
                    let id = format!("P{}", doc.persons.len() + 1);
                    doc.persons.push(PersonComponent {
                        person_id: id,
                        role_text: "mentioned".into(),
                        name_text: Some(e.value),
                        extras: Default::default(),
                    });
                }
                EntityKind::Organization => {
                    orgs.insert(e.value);
                }
            }
        }
        if !orgs.is_empty() {
            doc.extras
                .insert("extractedOrganizations".into(), Value::Array(orgs.into_iter().map(Value::String).collect()));
        }
    }

    /// Order-preserving batch transform; failures become `Err` entries at
    /// their input position instead of aborting the batch.
    pub fn transform_stream(&self, records: &[CadRecord], mode: Mode) -> Vec<Result<Transformed, RecordError>> {
        let indexed: Vec<(usize, &CadRecord)> = records.iter().enumerate().collect();
        par::map(mode, &indexed, |(index, rec)| {
            self.transform_record(rec).map_err(|error| RecordError { index: *index, error })
        })
    }
}

/// Reads an RFC 4180 CSV export with a header row.
pub fn read_cad_csv<R: Read>(reader: R) -> Result<Vec<CadRecord>, TransformError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| TransformError::Input(e.to_string()))?.clone();
    rdr.records()
        .map(|row| {
            let row = row.map_err(|e| TransformError::Input(e.to_string()))?;
            CadRecord::new(headers.iter().zip(row.iter()))
        })
        .collect()
}

/// Reads JSON-lines of flat objects. Scalars other than strings are
/// stringified; nested values are rejected per line.
pub fn read_cad_jsonl(text: &str) -> Vec<Result<CadRecord, TransformError>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |m: String| TransformError::Input(format!("line {}: {m}", i + 1));
            let v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let obj = v.as_object().ok_or_else(|| bad("expected a flat object".into()))?;
            let mut pairs = Vec::with_capacity(obj.len());
            for (k, v) in obj {
                let s = match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => return Err(bad(format!("column {k:?} is not a scalar"))),
                };
                pairs.push((k.clone(), s));
            }
            CadRecord::new(pairs)
        })
        .collect()
}
