//! Composite incident views, derived on demand from linked documents.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::correlator::IncidentContext;
use crate::model::{location_to_value, EidoDocument, IncidentStatus, LocationComponent, Timestamp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompositeError {
    #[error("incident {incident_id} links {eido_id}, which the store does not hold")]
    DanglingEido { incident_id: String, eido_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrativeEntry {
    pub timestamp: Timestamp,
    pub source_eido_id: String,
    pub note_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeView {
    pub incident_id: String,
    pub units: BTreeSet<String>,
    pub narrative: Vec<NarrativeEntry>,
    pub current_status: Option<IncidentStatus>,
    pub current_type: Option<String>,
    /// Distinct locations in first-seen order.
    pub locations: Vec<LocationComponent>,
    pub contributing_eido_ids: Vec<String>,
}

impl CompositeView {
    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("incidentId".into(), json!(self.incident_id));
        m.insert("units".into(), json!(self.units));
        m.insert(
            "narrative".into(),
            Value::Array(
                self.narrative
                    .iter()
                    .map(|n| {
                        json!({
                            "timestamp": n.timestamp.to_string(),
                            "sourceEidoId": n.source_eido_id,
                            "noteId": n.note_id,
                            "text": n.text,
                        })
                    })
                    .collect(),
            ),
        );
        if let Some(s) = self.current_status {
            m.insert("currentStatus".into(), json!(s.as_str()));
        }
        if let Some(t) = &self.current_type {
            m.insert("currentType".into(), json!(t));
        }
        m.insert("locations".into(), Value::Array(self.locations.iter().map(location_to_value).collect()));
        m.insert("contributingEidoIds".into(), json!(self.contributing_eido_ids));
        Value::Object(m)
    }

    /// Canonical JSON (sorted keys, compact).
    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }
}

/// Builds the composite view of `incident`. `resolve` maps an eidoId to its
/// stored document. Pure: nothing is written anywhere.
pub fn derive_composite<'a, F>(incident: &IncidentContext, resolve: F) -> Result<CompositeView, CompositeError>
where
    F: Fn(&str) -> Option<&'a EidoDocument>,
{
    let docs: Vec<&EidoDocument> = incident
        .linked_eido_ids
        .iter()
        .map(|id| {
            resolve(id).ok_or_else(|| CompositeError::DanglingEido {
                incident_id: incident.incident_id.clone(),
                eido_id: id.clone(),
            })
        })
        .collect::<Result<_, _>>()?;

    let units = docs.iter().flat_map(|d| d.unit_refs()).map(str::to_string).collect();

    let mut keyed: Vec<(usize, &EidoDocument, &crate::model::NotesComponent)> =
        docs.iter().enumerate().flat_map(|(arrival, d)| d.notes.iter().map(move |n| (arrival, *d, n))).collect();
    keyed.sort_by(|a, b| {
        a.2.timestamp.cmp_instant(&b.2.timestamp).then(a.0.cmp(&b.0)).then_with(|| a.2.note_id.cmp(&b.2.note_id))
    });
    let narrative = keyed
        .into_iter()
        .map(|(_, d, n)| NarrativeEntry {
            timestamp: n.timestamp,
            source_eido_id: d.eido_id.clone(),
            note_id: n.note_id.clone(),
            text: n.comments.clone(),
        })
        .collect();

    let mut locations: Vec<LocationComponent> = Vec::new();
    for loc in docs.iter().flat_map(|d| &d.locations) {
        let seen = locations.iter().any(|l| {
            l.geometry == loc.geometry && l.civic_address == loc.civic_address && l.description == loc.description
        });
        if !seen {
            locations.push(loc.clone());
        }
    }

    Ok(CompositeView {
        incident_id: incident.incident_id.clone(),
        units,
        narrative,
        current_status: most_recent(&docs, |d| d.incident.status),
        current_type: most_recent(&docs, |d| d.incident.incident_type.clone()),
        locations,
        contributing_eido_ids: incident.linked_eido_ids.clone(),
    })
}

/// Value from the latest-issued document that carries the field; equal
/// issue times go to the later arrival.
fn most_recent<T>(docs: &[&EidoDocument], field: impl Fn(&EidoDocument) -> Option<T>) -> Option<T> {
    docs.iter()
        .enumerate()
        .filter_map(|(arrival, d)| field(d).map(|v| (d.issued, arrival, v)))
        .max_by(|a, b| a.0.cmp_instant(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, _, v)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlator::TextVector;
    use crate::model::ResourceComponent;
    use std::collections::HashMap;

    fn doc(id: &str, issued: &str, units: &[&str]) -> EidoDocument {
        let mut d = EidoDocument::new(id, Timestamp::parse(issued).unwrap());
        for (i, u) in units.iter().enumerate() {
            d.resources.push(ResourceComponent {
                resource_id: format!("R{}", i + 1),
                unit_identifier: u.to_string(),
                extras: Default::default(),
            });
        }
        d
    }

    fn incident(docs: &[&EidoDocument]) -> IncidentContext {
        let mut ctx = IncidentContext::open("INC-000001", docs[0], TextVector::zero(8));
        for d in &docs[1..] {
            ctx.absorb(d, TextVector::zero(8));
        }
        ctx
    }

    #[test]
    fn units_are_a_union() {
        let a = doc("E1", "2026-01-01T00:00:00Z", &["A", "B"]);
        let b = doc("E2", "2026-01-01T01:00:00Z", &["B", "C"]);
        let store: HashMap<_, _> = [("E1", &a), ("E2", &b)].into_iter().collect();
        let view = derive_composite(&incident(&[&a, &b]), |id| store.get(id).copied()).unwrap();
        assert_eq!(view.units.into_iter().collect::<Vec<_>>(), ["A", "B", "C"]);
        assert_eq!(view.contributing_eido_ids, ["E1", "E2"]);
    }

    #[test]
    fn recency_uses_issue_time_then_arrival() {
        let mut late = doc("E1", "2026-01-01T05:00:00Z", &[]);
        late.incident.status = Some(IncidentStatus::Active);
        let mut early = doc("E2", "2026-01-01T01:00:00Z", &[]);
        early.incident.status = Some(IncidentStatus::Closed);
        early.incident.incident_type = Some("Weather.Flood".into());
        let store: HashMap<_, _> = [("E1", &late), ("E2", &early)].into_iter().collect();
        let view = derive_composite(&incident(&[&late, &early]), |id| store.get(id).copied()).unwrap();
        assert_eq!(view.current_status, Some(IncidentStatus::Active));
        assert_eq!(view.current_type.as_deref(), Some("Weather.Flood"));
    }

    #[test]
    fn dangling_link_is_reported() {
        let a = doc("E1", "2026-01-01T00:00:00Z", &[]);
        let err = derive_composite(&incident(&[&a]), |_| None).unwrap_err();
        assert!(err.to_string().contains("E1"));
    }
}
