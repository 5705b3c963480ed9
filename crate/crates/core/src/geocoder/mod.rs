//! Place-name resolution: local gazetteer first, an external client as a
//! fallback, incident context to pick between candidates.

mod client;
mod index;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::correlator::phi_g;
use crate::geo;
use crate::model::{EidoDocument, Geometry};

pub use client::{CachingClient, ExternalGeocoderClient, ExternalResult, FixtureClient};
pub use index::{
    normalize_name, parse_gazetteer, token_jaccard, GazetteerEntry, NameMatch, SpatialIndex, DEFAULT_CELL_DEG,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeocodeError {
    #[error("gazetteer line {line}: {message}")]
    Gazetteer { line: usize, message: String },
    #[error("geocoder fixtures: {0}")]
    Fixtures(String),
    #[error("geocoder cache: {0}")]
    Cache(String),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("external geocoder: {0}")]
    External(String),
    #[error("invalid geocoder config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeocoderConfig {
    pub match_weight: f64,
    pub context_weight: f64,
    /// Below this best gazetteer match score the external client is asked.
    pub fallback_threshold: f64,
    /// Half-life of the proximity signal, in meters.
    pub proximity_half_life_m: f64,
    /// Incident type (exact term, or the part before the first `.`) to the
    /// gazetteer categories it is plausibly about.
    pub category_affinity: BTreeMap<String, Vec<String>>,
    /// Jurisdiction assumed for documents that do not state one.
    pub default_jurisdiction: Option<String>,
}

impl Default for GeocoderConfig {
    fn default() -> Self {
        let aff = |pairs: &[(&str, &[&str])]| {
            pairs.iter().map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect())).collect()
        };
        Self {
            match_weight: 0.7,
            context_weight: 0.3,
            fallback_threshold: 0.6,
            proximity_half_life_m: 1000.0,
            category_affinity: aff(&[
                ("Weather", &["region", "river", "creek", "valley"]),
                ("Utility", &["region", "neighborhood"]),
                ("ROBBERY-ARMED", &["market", "store", "neighborhood"]),
                ("MEDICAL", &["school", "park", "market", "neighborhood"]),
                ("FIRE-STRUCTURE", &["neighborhood", "market", "school"]),
            ]),
            default_jurisdiction: None,
        }
    }
}

impl GeocoderConfig {
    pub fn validate(&self) -> Result<(), GeocodeError> {
        let (m, c) = (self.match_weight, self.context_weight);
        if !(m >= 0.0 && c >= 0.0 && ((m + c) - 1.0).abs() < 1e-9) {
            return Err(GeocodeError::Config(format!(
                "match and context weights must be non-negative and sum to 1, got {m} and {c}"
            )));
        }
        if !(0.0..=1.0).contains(&self.fallback_threshold) {
            return Err(GeocodeError::Config("fallback threshold must lie in [0, 1]".into()));
        }
        if self.proximity_half_life_m.is_nan() || self.proximity_half_life_m <= 0.0 {
            return Err(GeocodeError::Config("proximity half-life must be positive".into()));
        }
        Ok(())
    }

    fn categories_for(&self, incident_type: &str) -> Option<&[String]> {
        self.category_affinity
            .get(incident_type)
            .or_else(|| incident_type.split_once('.').and_then(|(head, _)| self.category_affinity.get(head)))
            .map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolveContext {
    pub incident_type: Option<String>,
    pub jurisdiction: Option<String>,
    pub nearby: Vec<Geometry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Gazetteer,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeocodeCandidate {
    pub source: CandidateSource,
    pub name: String,
    pub geometry: Geometry,
    pub civic_address: Option<String>,
    pub category: Option<String>,
    pub jurisdiction: Option<String>,
    pub match_score: f64,
    pub context_score: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "camelCase")]
pub enum GeocodeWarning {
    #[serde(rename_all = "camelCase")]
    NoResolution { location_id: String, text: String },
    #[serde(rename_all = "camelCase")]
    ExternalFailure { text: String, message: String },
}

impl std::fmt::Display for GeocodeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeocodeWarning::NoResolution { location_id, text } => {
                write!(f, "location {location_id}: no resolution for {text:?}")
            }
            GeocodeWarning::ExternalFailure { text, message } => {
                write!(f, "external geocoder failed for {text:?}: {message}")
            }
        }
    }
}

pub struct Geocoder {
    index: Arc<SpatialIndex>,
    client: Option<Arc<dyn ExternalGeocoderClient>>,
    config: GeocoderConfig,
}

impl Geocoder {
    pub fn new(
        index: Arc<SpatialIndex>,
        client: Option<Arc<dyn ExternalGeocoderClient>>,
        config: GeocoderConfig,
    ) -> Result<Self, GeocodeError> {
        config.validate()?;
        Ok(Self { index, client, config })
    }

    /// Bundled gazetteer and offline fixture client, default weights.
    pub fn bundled() -> Self {
        Self::new(
            Arc::new(SpatialIndex::bundled()),
            Some(Arc::new(FixtureClient::bundled())),
            GeocoderConfig::default(),
        )
        .expect("default config is valid")
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn config(&self) -> &GeocoderConfig {
        &self.config
    }

    /// Gazetteer name matches, best first. Context is not applied:
    /// `context_score` is 0 and `confidence` reflects the match alone.
    pub fn lookup(&self, text: &str) -> Vec<GeocodeCandidate> {
        self.index
            .lookup(text)
            .into_iter()
            .map(|m| {
                let e = self.index.entry(m.entry);
                GeocodeCandidate {
                    source: CandidateSource::Gazetteer,
                    name: e.name.clone(),
                    geometry: e.geometry.clone(),
                    civic_address: e.civic_address.clone(),
                    category: Some(e.category.clone()),
                    jurisdiction: Some(e.jurisdiction.clone()),
                    match_score: m.score,
                    context_score: 0.0,
                    confidence: self.config.match_weight * m.score,
                }
            })
            .collect()
    }

    /// Mean of the context signals that can be evaluated; 0 when none can.
    pub fn context_score(&self, c: &GeocodeCandidate, ctx: &ResolveContext) -> f64 {
        let mut signals: Vec<f64> = Vec::new();
        if let (Some(t), Some(cat)) = (&ctx.incident_type, &c.category) {
            if let Some(cats) = self.config.categories_for(t) {
                signals.push(if cats.iter().any(|x| x == cat) { 1.0 } else { 0.0 });
            }
        }
        if let (Some(a), Some(b)) = (&ctx.jurisdiction, &c.jurisdiction) {
            signals.push(if normalize_name(a) == normalize_name(b) { 1.0 } else { 0.0 });
        }
        if let Some(d) = geo::min_distance_m(std::iter::once(&c.geometry), &ctx.nearby) {
            signals.push(phi_g(d, self.config.proximity_half_life_m));
        }
        if signals.is_empty() {
            0.0
        } else {
            signals.iter().sum::<f64>() / signals.len() as f64
        }
    }

    /// Every candidate the cascade considers, scored with context, in
    /// selection order (best first).
    pub fn candidates(
        &self,
        text: &str,
        ctx: &ResolveContext,
        warnings: &mut Vec<GeocodeWarning>,
    ) -> Vec<GeocodeCandidate> {
        if text.trim().is_empty() {
            return Vec::new();
        }
        let mut all = self.lookup(text);
        let best_match = all.first().map_or(0.0, |c| c.match_score);
        if best_match < self.config.fallback_threshold {
            if let Some(client) = &self.client {
                let bias = ctx.nearby.first().map(|g| g.vertices()[0]);
                match client.query(text, bias) {
                    Ok(results) => all.extend(results.into_iter().enumerate().map(|(rank, r)| external(rank, r))),
                    Err(e) => warnings
                        .push(GeocodeWarning::ExternalFailure { text: text.to_string(), message: e.to_string() }),
                }
            }
        }
        for c in &mut all {
            c.context_score = self.context_score(c, ctx);
            c.confidence = self.config.match_weight * c.match_score + self.config.context_weight * c.context_score;
        }
        all.sort_by(|a, b| {
            b.confidence.total_cmp(&a.confidence).then(a.source.cmp(&b.source)).then_with(|| a.name.cmp(&b.name))
        });
        all
    }

    pub fn resolve(
        &self,
        text: &str,
        ctx: &ResolveContext,
        warnings: &mut Vec<GeocodeWarning>,
    ) -> Option<GeocodeCandidate> {
        self.candidates(text, ctx, warnings).into_iter().next()
    }

    /// Fills in geometry for locations that only have text. Existing text is
    /// kept verbatim; unresolvable locations are left as they are.
    pub fn enrich_document(&self, doc: &EidoDocument) -> (EidoDocument, Vec<GeocodeWarning>) {
        self.enrich_document_with(doc, &[])
    }

    /// As [`Geocoder::enrich_document`], with extra geometries (for example
    /// from a candidate incident) used as proximity context.
    pub fn enrich_document_with(
        &self,
        doc: &EidoDocument,
        extra_nearby: &[Geometry],
    ) -> (EidoDocument, Vec<GeocodeWarning>) {
        let mut out = doc.clone();
        let mut warnings = Vec::new();
        let ctx = ResolveContext {
            incident_type: doc.incident.incident_type.clone(),
            jurisdiction: doc
                .extras
                .get("jurisdiction")
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .or_else(|| self.config.default_jurisdiction.clone()),
            nearby: doc.geometries().cloned().chain(extra_nearby.iter().cloned()).collect(),
        };
        for loc in out.locations.iter_mut().filter(|l| l.geometry.is_none()) {
            let Some(text) = loc.place_text().map(str::to_string) else { continue };
            match self.resolve(&text, &ctx, &mut warnings) {
                Some(c) => {
                    loc.geometry = Some(c.geometry);
                    loc.confidence = Some(c.confidence);
                    if loc.civic_address.is_none() {
                        loc.civic_address = c.civic_address;
                    }
                }
                None => warnings.push(GeocodeWarning::NoResolution { location_id: loc.location_id.clone(), text }),
            }
        }
        (out, warnings)
    }
}

/// External results carry no name score of their own; rank stands in.
fn external(rank: usize, r: ExternalResult) -> GeocodeCandidate {
    GeocodeCandidate {
        source: CandidateSource::External,
        name: r.name,
        geometry: r.geometry,
        civic_address: r.civic_address,
        category: None,
        jurisdiction: None,
        match_score: 1.0 / (rank as f64 + 1.0),
        context_score: 0.0,
        confidence: 0.0,
    }
}
