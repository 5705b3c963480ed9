//! End-to-end orchestration used by the command-line tool.
//!
//! Inputs are read, transformed or parsed, and geocoded in parallel; the
//! resulting documents are then correlated and committed one at a time in
//! input order, so the outcome equals sequential processing.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::composite::{derive_composite, CompositeError, CompositeView};
use crate::config::PipelineConfig;
use crate::correlator::{CorrelationOutcome, Correlator, Decision};
use crate::geocoder::{CachingClient, ExternalGeocoderClient, FixtureClient, Geocoder, SpatialIndex};
use crate::model::{EidoDocument, ModelError, Validator, Vocabulary};
use crate::par::{self, Mode};
use crate::store::{replay, Decided, EventLogRecord, ReplayReport, Snapshot, Store, StoreError};
use crate::transform::{
    bundled_templates, parse_templates, read_cad_csv, read_cad_jsonl, CadRecord, MappingRegistry, RuleExtractor,
    Transformer,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{what}: {message}")]
    Setup { what: String, message: String },
}

fn setup(what: impl Into<String>, e: impl std::fmt::Display) -> EngineError {
    EngineError::Setup { what: what.into(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Eido,
    CadCsv,
    CadJsonl,
}

impl InputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eido" | "json" => Some(InputFormat::Eido),
            "csv" | "cad-csv" => Some(InputFormat::CadCsv),
            "jsonl" | "ndjson" | "cad-jsonl" => Some(InputFormat::CadJsonl),
            _ => None,
        }
    }

    /// By extension: `.json` is EIDO, `.csv` CAD CSV, `.jsonl`/`.ndjson` CAD JSON-lines.
    pub fn detect(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).and_then(|e| match e.as_str() {
            "json" => Some(InputFormat::Eido),
            "csv" => Some(InputFormat::CadCsv),
            "jsonl" | "ndjson" => Some(InputFormat::CadJsonl),
            _ => None,
        })
    }
}

/// A document ready for correlation, or why it could not be produced.
/// A document and its warnings as JSON, or why it could not be produced.
type Item = Result<(EidoDocument, Vec<Value>), String>;

#[derive(Debug, Clone)]
pub struct Prepared {
    /// `path#n`, 1-based within the file.
    pub source: String,
    pub result: Item,
}

pub struct Engine {
    transformer: Transformer,
    geocoder: Option<Geocoder>,
    correlator: Correlator,
    validator: Validator,
    mode: Mode,
}

impl Engine {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, EngineError> {
        let p = &cfg.paths;
        let vocabulary = match &p.vocabulary {
            Some(path) => Vocabulary::load(path).map_err(|e| setup("vocabulary", e))?,
            None => Vocabulary::bundled(),
        };
        let validator = Validator::new(Arc::new(vocabulary), cfg.strict);
        let registry = match &p.mappings {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| setup(path.display().to_string(), e))?;
                MappingRegistry::parse(&text, validator.vocabulary()).map_err(|e| setup("mappings", e))?
            }
            None => MappingRegistry::bundled(validator.vocabulary()),
        };
        let templates = match &p.templates {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| setup(path.display().to_string(), e))?;
                parse_templates(&text).map_err(|e| setup("templates", e))?
            }
            None => bundled_templates(),
        };
        let index = match &p.gazetteer {
            Some(path) => SpatialIndex::load(path).map_err(|e| setup("gazetteer", e))?,
            None => SpatialIndex::bundled(),
        };
        let place_names: Vec<String> =
            index.entries().iter().flat_map(|e| e.names().map(str::to_string).collect::<Vec<_>>()).collect();

        let geocoder = if cfg.geocoder.enabled {
            let client: Option<Arc<dyn ExternalGeocoderClient>> = if cfg.geocoder.external {
                let fixtures = match &p.geocoder_fixtures {
                    Some(path) => FixtureClient::load(path).map_err(|e| setup("geocoder fixtures", e))?,
                    None => FixtureClient::bundled(),
                };
                Some(match &p.geocoder_cache {
                    Some(path) => {
                        Arc::new(CachingClient::persistent(fixtures, path).map_err(|e| setup("geocoder cache", e))?)
                    }
                    None => Arc::new(fixtures),
                })
            } else {
                None
            };
            Some(
                Geocoder::new(Arc::new(index), client, cfg.geocoder.config.clone())
                    .map_err(|e| setup("geocoder", e))?,
            )
        } else {
            None
        };

        let mut options = cfg.transform.clone();
        options.strict_codes = options.strict_codes || cfg.strict;
        let transformer = Transformer {
            registry: Arc::new(registry),
            templates: Arc::new(templates),
            extractor: Arc::new(RuleExtractor::new(place_names)),
            bindings: cfg.bindings.clone(),
            validator: validator.clone(),
            options,
        };
        let correlator = Correlator::new(cfg.correlation.clone()).map_err(|e| setup("correlation", e))?;
        Ok(Self { transformer, geocoder, correlator, validator, mode: Mode::default() })
    }

    /// Bundled reference data and default settings.
    pub fn bundled() -> Self {
        Self::from_config(&PipelineConfig::default()).expect("defaults are valid")
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self.correlator = self.correlator.with_mode(mode);
        self
    }

    pub fn correlator(&self) -> &Correlator {
        &self.correlator
    }

    pub fn transformer(&self) -> &Transformer {
        &self.transformer
    }

    pub fn geocoder(&self) -> Option<&Geocoder> {
        self.geocoder.as_ref()
    }

    pub fn validator(&self) -> &Validator {
        &self.validator
    }

    /// Reads every input and produces documents in command-line order, then
    /// intra-file order.
    pub fn prepare(&self, inputs: &[(PathBuf, Option<InputFormat>)]) -> Vec<Prepared> {
        let mut out = Vec::new();
        for (path, forced) in inputs {
            out.extend(self.prepare_file(path, *forced));
        }
        out
    }

    pub fn prepare_file(&self, path: &Path, forced: Option<InputFormat>) -> Vec<Prepared> {
        let name = path.display().to_string();
        let fail = |message: String| vec![Prepared { source: name.clone(), result: Err(message) }];
        let Some(format) = forced.or_else(|| InputFormat::detect(path)) else {
            return fail("cannot tell the input format from the extension; pass --format".into());
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(e.to_string()),
        };
        let parsed: Vec<Item> = match format {
            InputFormat::Eido => match self.parse_eido_text(&text) {
                Ok(v) => v,
                Err(e) => return fail(e),
            },
            InputFormat::CadCsv => match read_cad_csv(text.as_bytes()) {
                Ok(records) => self.transform_records(&records),
                Err(e) => return fail(e.to_string()),
            },
            InputFormat::CadJsonl => {
                let records: Vec<Result<CadRecord, String>> =
                    read_cad_jsonl(&text).into_iter().map(|r| r.map_err(|e| e.to_string())).collect();
                let ok: Vec<CadRecord> = records.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
                let mut transformed = self.transform_records(&ok).into_iter();
                records
                    .into_iter()
                    .map(|r| match r {
                        Ok(_) => transformed.next().expect("one result per record"),
                        Err(e) => Err(e),
                    })
                    .collect()
            }
        };
        let enriched = par::map_owned(self.mode, parsed, |r| r.map(|(doc, warnings)| self.enrich(doc, warnings)));
        enriched
            .into_iter()
            .enumerate()
            .map(|(i, result)| Prepared { source: format!("{name}#{}", i + 1), result })
            .collect()
    }

    /// Parses an EIDO-JSON file without enrichment; any invalid document fails the file.
    pub fn read_documents(&self, path: &Path) -> Result<Vec<EidoDocument>, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.parse_eido_text(&text)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.map(|(d, _)| d).map_err(|e| format!("{}#{}: {e}", path.display(), i + 1)))
            .collect()
    }

    /// A single document object or an array of them.
    fn parse_eido_text(&self, text: &str) -> Result<Vec<Item>, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let items = match value {
            Value::Array(items) => items,
            single => vec![single],
        };
        Ok(items
            .iter()
            .map(|v| {
                self.validator
                    .parse_value(v)
                    .map(|p| (p.document, p.warnings.iter().map(|w| json!({"warning": w.to_string()})).collect()))
                    .map_err(|e: ModelError| e.to_string())
            })
            .collect())
    }

    fn transform_records(&self, records: &[CadRecord]) -> Vec<Item> {
        self.transformer
            .transform_stream(records, self.mode)
            .into_iter()
            .map(|r| {
                r.map(|t| {
                    let w = t.warnings.iter().map(|w| serde_json::to_value(w).expect("warnings serialize")).collect();
                    (t.document, w)
                })
                .map_err(|e| e.error.to_string())
            })
            .collect()
    }

    fn enrich(&self, doc: EidoDocument, mut warnings: Vec<Value>) -> (EidoDocument, Vec<Value>) {
        match &self.geocoder {
            Some(g) => {
                let (doc, w) = g.enrich_document(&doc);
                warnings.extend(w.iter().map(|w| serde_json::to_value(w).expect("warnings serialize")));
                (doc, warnings)
            }
            None => (doc, warnings),
        }
    }

    /// Decides against the store's current state without committing.
    pub fn decide(&self, snapshot: &Snapshot, doc: &EidoDocument) -> Result<Decided, StoreError> {
        snapshot.decide(doc, &self.correlator.vectorize(doc), &self.correlator)
    }

    /// Scores without committing (resubmissions are scored like new documents).
    pub fn score(&self, snapshot: &Snapshot, doc: &EidoDocument) -> CorrelationOutcome {
        self.correlator.correlate(doc, snapshot.incidents())
    }

    /// Correlates and commits each prepared document in order.
    pub fn ingest(&self, store: &mut Store, prepared: &[Prepared]) -> IngestReport {
        let mut report = IngestReport::default();
        for p in prepared {
            let (doc, warnings) = match &p.result {
                Ok(x) => x,
                Err(e) => {
                    report.errors.push(format!("{}: {e}", p.source));
                    continue;
                }
            };
            let decided = match self.decide(store.snapshot(), doc) {
                Ok(d) => d,
                Err(e) => {
                    report.errors.push(format!("{}: {e}", p.source));
                    continue;
                }
            };
            if let Err(e) = store.commit(&decided, &self.correlator) {
                report.fatal = Some(e);
                break;
            }
            report.decisions.push(decision_line(&p.source, doc, &decided, warnings));
        }
        report
    }

    pub fn composite(&self, snapshot: &Snapshot, incident_id: &str) -> Option<Result<CompositeView, CompositeError>> {
        let incident = snapshot.incident(incident_id)?;
        Some(derive_composite(incident, |id| snapshot.document(id)))
    }

    pub fn replay(&self, records: &[EventLogRecord]) -> Result<ReplayReport, StoreError> {
        replay(records, &self.correlator)
    }
}

#[derive(Debug, Default)]
pub struct IngestReport {
    /// One JSON object per committed or resubmitted document.
    pub decisions: Vec<Value>,
    /// Per-record failures; processing continued past them.
    pub errors: Vec<String>,
    /// A store write failed; processing stopped.
    pub fatal: Option<StoreError>,
}

/// The decision-log line for one document.
pub fn decision_line(source: &str, doc: &EidoDocument, decided: &Decided, warnings: &[Value]) -> Value {
    // A resubmission stays in the incident it was first linked to.
    let decision = match (&decided.outcome.decision, decided.resubmission) {
        (Decision::NewIncident, false) => "NewIncident",
        _ => "LinkTo",
    };
    json!({
        "source": source,
        "eidoId": doc.eido_id,
        "decision": decision,
        "incidentId": decided.incident_id,
        "resubmission": decided.resubmission,
        "ranked": decided.outcome.ranked,
        "warnings": warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
    }

    #[test]
    fn detects_formats() {
        assert_eq!(InputFormat::detect(Path::new("a.JSON")), Some(InputFormat::Eido));
        assert_eq!(InputFormat::detect(Path::new("a.csv")), Some(InputFormat::CadCsv));
        assert_eq!(InputFormat::detect(Path::new("a.ndjson")), Some(InputFormat::CadJsonl));
        assert_eq!(InputFormat::detect(Path::new("a.txt")), None);
    }

    #[test]
    fn case_study_links() {
        let engine = Engine::bundled();
        let prepared =
            engine.prepare(&[(fixture("nws_flood_warning.json"), None), (fixture("news_report.json"), None)]);
        let mut store = Store::in_memory();
        let report = engine.ingest(&mut store, &prepared);
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        let d: Vec<_> = report.decisions.iter().map(|d| d["decision"].as_str().unwrap()).collect();
        assert_eq!(d, ["NewIncident", "LinkTo"]);
        assert_eq!(store.snapshot().incidents().len(), 1);
    }

    #[test]
    fn duplicate_input_links_to_original() {
        let engine = Engine::bundled();
        let f = fixture("nws_flood_warning.json");
        let prepared = engine.prepare(&[(f.clone(), None), (f, None)]);
        let mut store = Store::in_memory();
        let report = engine.ingest(&mut store, &prepared);
        let second = &report.decisions[1];
        assert_eq!(second["decision"], "LinkTo");
        assert_eq!(second["resubmission"], true);
        assert_eq!(second["incidentId"], report.decisions[0]["incidentId"]);
        assert!((second["ranked"][0]["sigma"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(store.snapshot().records_applied(), 3);
    }

    #[test]
    fn cad_csv_rows_become_documents() {
        let engine = Engine::bundled();
        let prepared = engine.prepare(&[(fixture("cad_sample.csv"), None)]);
        assert_eq!(prepared.len(), 3);
        assert!(prepared.iter().all(|p| p.result.is_ok()));
        assert_eq!(prepared[0].source, format!("{}#1", fixture("cad_sample.csv").display()));
    }

    #[test]
    fn unreadable_input_is_a_record_error() {
        let engine = Engine::bundled();
        let prepared = engine.prepare(&[(PathBuf::from("/no/such.json"), None)]);
        let report = engine.ingest(&mut Store::in_memory(), &prepared);
        assert_eq!(report.errors.len(), 1);
        assert!(report.decisions.is_empty());
    }
}
