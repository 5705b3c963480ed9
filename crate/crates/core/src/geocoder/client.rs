use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::model::{Geometry, LatLon};

use super::index::normalize_name;
use super::GeocodeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalResult {
    pub name: String,
    #[serde(serialize_with = "ser_geometry", deserialize_with = "de_geometry")]
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub civic_address: Option<String>,
}

fn ser_geometry<S: Serializer>(g: &Geometry, s: S) -> Result<S::Ok, S::Error> {
    g.to_json().serialize(s)
}

fn de_geometry<'de, D: Deserializer<'de>>(d: D) -> Result<Geometry, D::Error> {
    let v = Value::deserialize(d)?;
    let g = Geometry::from_json(&v).map_err(serde::de::Error::custom)?;
    g.validate().map_err(serde::de::Error::custom)?;
    Ok(g)
}

/// A place-search service. Results come best first.
pub trait ExternalGeocoderClient: Send + Sync {
    fn query(&self, text: &str, bias: Option<LatLon>) -> Result<Vec<ExternalResult>, GeocodeError>;
}

/// Canned responses keyed by normalised query text. Deterministic, offline.
#[derive(Debug, Clone, Default)]
pub struct FixtureClient {
    responses: BTreeMap<String, Vec<ExternalResult>>,
}

impl FixtureClient {
    pub fn parse(json: &str) -> Result<Self, GeocodeError> {
        let raw: BTreeMap<String, Vec<ExternalResult>> =
            serde_json::from_str(json).map_err(|e| GeocodeError::Fixtures(e.to_string()))?;
        Ok(Self { responses: raw.into_iter().map(|(k, v)| (normalize_name(&k), v)).collect() })
    }

    pub fn load(path: &Path) -> Result<Self, GeocodeError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GeocodeError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(crate::bundled::GEOCODER_FIXTURES).expect("bundled fixtures are well-formed")
    }
}

impl ExternalGeocoderClient for FixtureClient {
    fn query(&self, text: &str, _bias: Option<LatLon>) -> Result<Vec<ExternalResult>, GeocodeError> {
        Ok(self.responses.get(&normalize_name(text)).cloned().unwrap_or_default())
    }
}

/// Memoises another client, optionally persisting to a JSON file.
///
/// The file is replaced atomically (write to a temporary sibling, then
/// rename), so readers never see a torn file. Concurrent writers race with
/// last-write-wins semantics.
pub struct CachingClient<C> {
    inner: C,
    path: Option<PathBuf>,
    cache: RwLock<BTreeMap<String, Vec<ExternalResult>>>,
}

impl<C: ExternalGeocoderClient> CachingClient<C> {
    pub fn in_memory(inner: C) -> Self {
        Self { inner, path: None, cache: RwLock::new(BTreeMap::new()) }
    }

    /// Loads an existing cache file if there is one.
    pub fn persistent(inner: C, path: impl Into<PathBuf>) -> Result<Self, GeocodeError> {
        let path = path.into();
        let cache = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| GeocodeError::Cache(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(GeocodeError::Io(path.display().to_string(), e.to_string())),
        };
        Ok(Self { inner, path: Some(path), cache: RwLock::new(cache) })
    }

    pub fn cached_queries(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    fn persist(&self, snapshot: &BTreeMap<String, Vec<ExternalResult>>) -> Result<(), GeocodeError> {
        let Some(path) = &self.path else { return Ok(()) };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let io = |e: std::io::Error| GeocodeError::Io(path.display().to_string(), e.to_string());
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        let body = serde_json::to_vec_pretty(snapshot).map_err(|e| GeocodeError::Cache(e.to_string()))?;
        tmp.write_all(&body).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

impl<C: ExternalGeocoderClient> ExternalGeocoderClient for CachingClient<C> {
    fn query(&self, text: &str, bias: Option<LatLon>) -> Result<Vec<ExternalResult>, GeocodeError> {
        let key = normalize_name(text);
        if let Some(hit) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(hit);
        }
        let fresh = self.inner.query(text, bias)?;
        let snapshot = {
            let mut cache = self.cache.write().map_err(|_| GeocodeError::Cache("cache lock poisoned".into()))?;
            cache.insert(key, fresh.clone());
            cache.clone()
        };
        self.persist(&snapshot)?;
        Ok(fresh)
    }
}
