//! Links each incoming document to an existing incident or opens a new one.
//!
//! The score of a document against an incident is
//!
//! ```text
//! Σ = w_t·φ_t(Δt) + w_g·φ_g(Δg) + w_s·φ_s(text)
//! ```
//!
//! with `φ_t` and `φ_g` half-life decays and `φ_s` the best clamped cosine
//! against the incident's document vectors. Candidates first pass a temporal
//! window and a spatial gate; the surviving argmax is linked when its score
//! reaches `τ`.

mod text;

use std::collections::HashMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo;
use crate::model::{descriptive_text, EidoDocument, Geometry, Timestamp};
use crate::par::{self, Mode};

pub use text::{tokenize, HashedTfVectorizer, TextVector, Vectorizer, DEFAULT_DIMENSION};

/// Scores within this distance of the maximum count as tied.
pub const TIE_EPSILON: f64 = 1e-9;

/// Temporal evidence: `exp(-ln2 · Δt / h_t)`.
pub fn phi_t(delta_t_secs: f64, half_life_secs: f64) -> f64 {
    decay(delta_t_secs, half_life_secs)
}

/// Spatial evidence: `exp(-ln2 · Δg / h_g)`.
pub fn phi_g(delta_g_m: f64, half_life_m: f64) -> f64 {
    decay(delta_g_m, half_life_m)
}

fn decay(x: f64, half_life: f64) -> f64 {
    (-LN_2 * x.max(0.0) / half_life).exp()
}

/// Semantic evidence: best clamped cosine between the new vector and any
/// of the incident's vectors.
pub fn phi_s(new: &TextVector, incident_vectors: &[TextVector]) -> f64 {
    incident_vectors.iter().map(|v| new.cosine(v).clamp(0.0, 1.0)).fold(0.0, f64::max)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("weights must be finite and non-negative with a positive sum, got {0:?}")]
    Weights([f64; 3]),
    #[error("tau must lie in [0, 1], got {0}")]
    Tau(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingEvidence {
    /// Drop the missing term and rescale the remaining weights to sum to 1.
    #[default]
    Renormalize,
    /// Keep the weights and score the missing term as 0.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationConfig {
    /// `[w_t, w_g, w_s]`, normalised to sum to 1 by [`CorrelationConfig::normalized`].
    pub weights: [f64; 3],
    pub tau: f64,
    pub temporal_half_life_s: f64,
    pub spatial_half_life_m: f64,
    /// Candidate window `W`; `f64::INFINITY` disables the temporal gate.
    pub candidate_window_s: f64,
    /// Spatial gate `G_max`; `f64::INFINITY` disables it.
    pub spatial_gate_m: f64,
    pub missing_evidence: MissingEvidence,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            weights: [1.0 / 3.0; 3],
            tau: 0.55,
            temporal_half_life_s: 2.0 * 3600.0,
            spatial_half_life_m: 1000.0,
            candidate_window_s: 24.0 * 3600.0,
            spatial_gate_m: 50_000.0,
            missing_evidence: MissingEvidence::Renormalize,
        }
    }
}

impl CorrelationConfig {
    /// Validates and rescales the weights to sum to 1.
    pub fn normalized(mut self) -> Result<Self, ConfigError> {
        let w = self.weights;
        let sum: f64 = w.iter().sum();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || sum <= 0.0 {
            return Err(ConfigError::Weights(w));
        }
        self.weights = w.map(|x| x / sum);
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::Tau(self.tau));
        }
        for (name, v) in [
            ("temporal half-life", self.temporal_half_life_s),
            ("spatial half-life", self.spatial_half_life_m),
            ("candidate window", self.candidate_window_s),
            ("spatial gate", self.spatial_gate_m),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ConfigError::NonPositive(name));
            }
        }
        Ok(self)
    }

    pub fn gates_disabled(mut self) -> Self {
        self.candidate_window_s = f64::INFINITY;
        self.spatial_gate_m = f64::INFINITY;
        self
    }
}

/// An incident: the documents linked to it plus cached evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentContext {
    pub incident_id: String,
    /// Arrival order.
    pub linked_eido_ids: Vec<String>,
    pub created_at: Timestamp,
    /// Latest `issuedTimestamp` among linked documents.
    pub latest_activity: Timestamp,
    pub geometries: Vec<Geometry>,
    pub vectors: Vec<TextVector>,
}

impl IncidentContext {
    pub fn open(incident_id: impl Into<String>, doc: &EidoDocument, vector: TextVector) -> Self {
        Self {
            incident_id: incident_id.into(),
            linked_eido_ids: vec![doc.eido_id.clone()],
            created_at: doc.issued,
            latest_activity: doc.issued,
            geometries: doc.geometries().cloned().collect(),
            vectors: vec![vector],
        }
    }

    pub fn absorb(&mut self, doc: &EidoDocument, vector: TextVector) {
        self.linked_eido_ids.push(doc.eido_id.clone());
        if doc.issued > self.latest_activity {
            self.latest_activity = doc.issued;
        }
        self.geometries.extend(doc.geometries().cloned());
        self.vectors.push(vector);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityWeights {
    pub temporal: Option<f64>,
    pub spatial: Option<f64>,
    pub semantic: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gates {
    pub temporal: bool,
    pub spatial: bool,
}

impl Gates {
    pub fn passed(&self) -> bool {
        self.temporal && self.spatial
    }
}

/// Every quantity behind one candidate's score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityBreakdown {
    pub incident_id: String,
    pub delta_t_seconds: f64,
    /// `None` when either side has no geometry.
    pub delta_g_meters: Option<f64>,
    pub phi_t: f64,
    /// `None` when the modality is unavailable and dropped.
    pub phi_g: Option<f64>,
    pub phi_s: Option<f64>,
    pub effective_weights: ModalityWeights,
    pub sigma: f64,
    pub passed_gates: Gates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "incidentId")]
pub enum Decision {
    LinkTo(String),
    NewIncident,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationOutcome {
    pub decision: Decision,
    /// Gate survivors by descending Σ, then gated-out candidates; ties by
    /// creation time, then id.
    pub ranked: Vec<SimilarityBreakdown>,
}

/// Stateless scorer; holds configuration and the text vectorizer.
pub struct Correlator {
    config: CorrelationConfig,
    vectorizer: Box<dyn Vectorizer>,
    mode: Mode,
}

impl Correlator {
    pub fn new(config: CorrelationConfig) -> Result<Self, ConfigError> {
        Self::with_vectorizer(config, Box::new(HashedTfVectorizer::default()))
    }

    pub fn with_vectorizer(config: CorrelationConfig, vectorizer: Box<dyn Vectorizer>) -> Result<Self, ConfigError> {
        Ok(Self { config: config.normalized()?, vectorizer, mode: Mode::default() })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn config(&self) -> &CorrelationConfig {
        &self.config
    }

    pub fn vectorize(&self, doc: &EidoDocument) -> TextVector {
        self.vectorizer.vectorize(&descriptive_text(doc))
    }

    /// Full score of `doc` (with its precomputed vector) against one incident.
    pub fn score(&self, doc: &EidoDocument, vector: &TextVector, incident: &IncidentContext) -> SimilarityBreakdown {
        let cfg = &self.config;
        let delta_t = doc.issued.abs_diff_secs(&incident.latest_activity);
        let new_geoms: Vec<&Geometry> = doc.geometries().collect();
        let delta_g = geo::min_distance_m(new_geoms.iter().copied(), &incident.geometries);

        let phi_t = phi_t(delta_t, cfg.temporal_half_life_s);
        let phi_g = delta_g.map(|d| phi_g(d, cfg.spatial_half_life_m));
        let semantic_available = !vector.is_zero() && incident.vectors.iter().any(|v| !v.is_zero());
        let phi_s = semantic_available.then(|| phi_s(vector, &incident.vectors));

        let [wt, wg, ws] = cfg.weights;
        let (effective, phis) = match cfg.missing_evidence {
            MissingEvidence::Renormalize => {
                let avail = wt + phi_g.map_or(0.0, |_| wg) + phi_s.map_or(0.0, |_| ws);
                let eff = |w: f64, present: bool| (present && avail > 0.0).then(|| w / avail);
                (
                    ModalityWeights {
                        temporal: eff(wt, true),
                        spatial: eff(wg, phi_g.is_some()),
                        semantic: eff(ws, phi_s.is_some()),
                    },
                    (Some(phi_t), phi_g, phi_s),
                )
            }
            MissingEvidence::Zero => (
                ModalityWeights { temporal: Some(wt), spatial: Some(wg), semantic: Some(ws) },
                (Some(phi_t), Some(phi_g.unwrap_or(0.0)), Some(phi_s.unwrap_or(0.0))),
            ),
        };
        let sigma = [(effective.temporal, phis.0), (effective.spatial, phis.1), (effective.semantic, phis.2)]
            .into_iter()
            .filter_map(|(w, p)| Some(w? * p?))
            .sum();

        SimilarityBreakdown {
            incident_id: incident.incident_id.clone(),
            delta_t_seconds: delta_t,
            delta_g_meters: delta_g,
            phi_t,
            phi_g: phis.1,
            phi_s: phis.2,
            effective_weights: effective,
            sigma,
            passed_gates: Gates {
                temporal: delta_t <= cfg.candidate_window_s,
                spatial: delta_g.is_none_or(|d| d <= cfg.spatial_gate_m),
            },
        }
    }

    /// Scores every candidate and decides. `incidents` may be in any order.
    pub fn correlate(&self, doc: &EidoDocument, incidents: &[IncidentContext]) -> CorrelationOutcome {
        let vector = self.vectorize(doc);
        self.correlate_with_vector(doc, &vector, incidents)
    }

    pub fn correlate_with_vector(
        &self,
        doc: &EidoDocument,
        vector: &TextVector,
        incidents: &[IncidentContext],
    ) -> CorrelationOutcome {
        // stage 1: temporal window, cheap, before any geometry work
        let window = self.config.candidate_window_s;
        let (in_window, outside): (Vec<&IncidentContext>, Vec<&IncidentContext>) =
            incidents.iter().partition(|i| doc.issued.abs_diff_secs(&i.latest_activity) <= window);

        // stages 2-3: spatial gate and full score for the survivors
        let scored = par::map(self.mode, &in_window, |i| (*i, self.score(doc, vector, i)));
        let late = outside.iter().map(|i| (*i, self.score(doc, vector, i)));

        let mut eligible: Vec<(&IncidentContext, SimilarityBreakdown)> = Vec::new();
        let mut gated: Vec<(&IncidentContext, SimilarityBreakdown)> = Vec::new();
        for (inc, b) in scored.into_iter().chain(late) {
            if b.passed_gates.passed() {
                eligible.push((inc, b));
            } else {
                gated.push((inc, b));
            }
        }

        let decision = match best_candidate(&eligible) {
            Some((inc, b)) if b.sigma >= self.config.tau => Decision::LinkTo(inc.incident_id.clone()),
            _ => Decision::NewIncident,
        };
        let rank = |v: &mut Vec<(&IncidentContext, SimilarityBreakdown)>| {
            v.sort_by(|(ia, a), (ib, b)| {
                b.sigma
                    .total_cmp(&a.sigma)
                    .then_with(|| ia.created_at.cmp_instant(&ib.created_at))
                    .then_with(|| ia.incident_id.cmp(&ib.incident_id))
            })
        };
        rank(&mut eligible);
        rank(&mut gated);
        let ranked = eligible.into_iter().chain(gated).map(|(_, b)| b).collect();
        CorrelationOutcome { decision, ranked }
    }
}

/// Highest Σ; near-ties go to the earliest-created incident, then the
/// smallest id.
fn best_candidate<'a>(
    candidates: &'a [(&'a IncidentContext, SimilarityBreakdown)],
) -> Option<&'a (&'a IncidentContext, SimilarityBreakdown)> {
    let max = candidates.iter().map(|(_, b)| b.sigma).fold(f64::NEG_INFINITY, f64::max);
    candidates.iter().filter(|(_, b)| b.sigma >= max - TIE_EPSILON).min_by(|(a, _), (b, _)| {
        a.created_at.cmp_instant(&b.created_at).then_with(|| a.incident_id.cmp(&b.incident_id))
    })
}

/// Open incidents held in memory, committed one decision at a time.
#[derive(Debug, Clone, Default)]
pub struct IncidentBook {
    incidents: Vec<IncidentContext>,
    index: HashMap<String, usize>,
    members: HashMap<String, usize>,
    created: u64,
}

impl IncidentBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn incidents(&self) -> &[IncidentContext] {
        &self.incidents
    }

    pub fn get(&self, incident_id: &str) -> Option<&IncidentContext> {
        self.index.get(incident_id).map(|i| &self.incidents[*i])
    }

    pub fn len(&self) -> usize {
        self.incidents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incidents.is_empty()
    }

    /// Id the next created incident will receive.
    pub fn next_id(&self) -> String {
        format!("INC-{:06}", self.created + 1)
    }

    /// Opens an incident under an explicit id (used when replaying a log).
    pub fn open_with_id(&mut self, incident_id: &str, doc: &EidoDocument, vector: TextVector) -> bool {
        if self.index.contains_key(incident_id) {
            return false;
        }
        self.created += 1;
        self.index.insert(incident_id.to_string(), self.incidents.len());
        self.members.insert(doc.eido_id.clone(), self.incidents.len());
        self.incidents.push(IncidentContext::open(incident_id, doc, vector));
        true
    }

    pub fn open(&mut self, doc: &EidoDocument, vector: TextVector) -> String {
        let id = self.next_id();
        self.open_with_id(&id, doc, vector);
        id
    }

    pub fn link(&mut self, incident_id: &str, doc: &EidoDocument, vector: TextVector) -> bool {
        match self.index.get(incident_id) {
            Some(i) => {
                self.incidents[*i].absorb(doc, vector);
                self.members.insert(doc.eido_id.clone(), *i);
                true
            }
            None => false,
        }
    }

    /// Incident a document is linked to, if any.
    pub fn incident_of(&self, eido_id: &str) -> Option<&IncidentContext> {
        self.members.get(eido_id).map(|i| &self.incidents[*i])
    }
}
