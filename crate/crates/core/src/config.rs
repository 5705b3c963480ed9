//! Pipeline configuration: one TOML file, every section optional.
//!
//! ```toml
//! strict = false
//!
//! [paths]
//! log = "incidents.jsonl"
//! gazetteer = "gazetteer.jsonl"
//!
//! [correlation]
//! weights = [1.0, 1.0, 1.0]
//! tau = 0.55
//! candidate_window_s = inf
//! ```
//!
//! Relative paths resolve against the directory holding the file. Reference
//! data that is not configured falls back to the bundled copies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::correlator::{CorrelationConfig, MissingEvidence};
use crate::geocoder::GeocoderConfig;
use crate::transform::{FieldBindings, FieldRole, TransformOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("{key}: file {path} does not exist")]
    MissingFile { key: &'static str, path: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub log: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
    pub mappings: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub geocoder_fixtures: Option<PathBuf>,
    pub geocoder_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeocoderSettings {
    pub enabled: bool,
    /// Consult the external client (offline fixtures unless replaced).
    pub external: bool,
    pub config: GeocoderConfig,
}

impl Default for GeocoderSettings {
    fn default() -> Self {
        Self { enabled: true, external: true, config: GeocoderConfig::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub correlation: CorrelationConfig,
    pub geocoder: GeocoderSettings,
    pub transform: TransformOptions,
    pub bindings: FieldBindings,
    /// Unknown registry terms and unmapped codes are errors.
    pub strict: bool,
    pub fsync: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    strict: Option<bool>,
    paths: RawPaths,
    correlation: RawCorrelation,
    geocoder: RawGeocoder,
    transform: RawTransform,
    store: RawStore,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawPaths {
    log: Option<PathBuf>,
    gazetteer: Option<PathBuf>,
    vocabulary: Option<PathBuf>,
    mappings: Option<PathBuf>,
    templates: Option<PathBuf>,
    geocoder_fixtures: Option<PathBuf>,
    geocoder_cache: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawCorrelation {
    weights: Option<[f64; 3]>,
    tau: Option<f64>,
    temporal_half_life_s: Option<f64>,
    spatial_half_life_m: Option<f64>,
    candidate_window_s: Option<f64>,
    spatial_gate_m: Option<f64>,
    missing_evidence: Option<MissingEvidence>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawGeocoder {
    enabled: Option<bool>,
    external: Option<bool>,
    match_weight: Option<f64>,
    context_weight: Option<f64>,
    fallback_threshold: Option<f64>,
    proximity_half_life_m: Option<f64>,
    default_jurisdiction: Option<String>,
    category_affinity: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawTransform {
    default_year: Option<i32>,
    default_utc_offset: Option<String>,
    source_descriptor: Option<String>,
    /// Column name to role; replaces the default bindings entirely.
    bindings: Option<BTreeMap<String, FieldRole>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawStore {
    fsync: Option<bool>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses and validates; relative paths are joined onto `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = PipelineConfig::default();
        let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });
        let rp = raw.paths;
        cfg.paths = Paths {
            log: resolve(rp.log),
            gazetteer: resolve(rp.gazetteer),
            vocabulary: resolve(rp.vocabulary),
            mappings: resolve(rp.mappings),
            templates: resolve(rp.templates),
            geocoder_fixtures: resolve(rp.geocoder_fixtures),
            geocoder_cache: resolve(rp.geocoder_cache),
        };

        let c = raw.correlation;
        let cc = &mut cfg.correlation;
        set(&mut cc.weights, c.weights);
        set(&mut cc.tau, c.tau);
        set(&mut cc.temporal_half_life_s, c.temporal_half_life_s);
        set(&mut cc.spatial_half_life_m, c.spatial_half_life_m);
        set(&mut cc.candidate_window_s, c.candidate_window_s);
        set(&mut cc.spatial_gate_m, c.spatial_gate_m);
        set(&mut cc.missing_evidence, c.missing_evidence);

        let g = raw.geocoder;
        let gs = &mut cfg.geocoder;
        set(&mut gs.enabled, g.enabled);
        set(&mut gs.external, g.external);
        set(&mut gs.config.match_weight, g.match_weight);
        set(&mut gs.config.context_weight, g.context_weight);
        set(&mut gs.config.fallback_threshold, g.fallback_threshold);
        set(&mut gs.config.proximity_half_life_m, g.proximity_half_life_m);
        set(&mut gs.config.category_affinity, g.category_affinity);
        if g.default_jurisdiction.is_some() {
            gs.config.default_jurisdiction = g.default_jurisdiction;
        }

        let t = raw.transform;
        if t.default_year.is_some() {
            cfg.transform.default_year = t.default_year;
        }
        set(&mut cfg.transform.default_utc_offset, t.default_utc_offset);
        set(&mut cfg.transform.source_descriptor, t.source_descriptor);
        if let Some(b) = t.bindings {
            cfg.bindings = FieldBindings::from_columns(b).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        set(&mut cfg.strict, raw.strict);
        set(&mut cfg.fsync, raw.store.fsync);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks value ranges and that every configured input file exists.
    /// The log and cache may be created on first use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.correlation.clone().normalized().map_err(|e| ConfigError::Invalid(format!("correlation: {e}")))?;
        self.geocoder.config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if crate::model::parse_utc_offset(&self.transform.default_utc_offset).is_none() {
            return Err(ConfigError::Invalid(format!(
                "transform.default_utc_offset: {:?} is not an offset like -08:00",
                self.transform.default_utc_offset
            )));
        }
        let p = &self.paths;
        for (key, path) in [
            ("paths.gazetteer", &p.gazetteer),
            ("paths.vocabulary", &p.vocabulary),
            ("paths.mappings", &p.mappings),
            ("paths.templates", &p.templates),
            ("paths.geocoder_fixtures", &p.geocoder_fixtures),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    return Err(ConfigError::MissingFile { key, path: path.display().to_string() });
                }
            }
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}
