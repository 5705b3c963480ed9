use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::geo::{self, EARTH_RADIUS_M};
use crate::model::{Geometry, LatLon};

use super::GeocodeError;

pub const DEFAULT_CELL_DEG: f64 = 0.01;

/// Entries whose bounding box spans more cells than this go on an
/// always-checked list instead of being rasterised into the grid.
const MAX_CELLS_PER_ENTRY: u64 = 1 << 16;
/// Radius queries covering more cells than this scan every entry.
const MAX_CELLS_PER_QUERY: u64 = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    pub name: String,
    pub aliases: Vec<String>,
    pub geometry: Geometry,
    pub category: String,
    pub jurisdiction: String,
    pub civic_address: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawEntry {
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    geometry: Value,
    category: String,
    jurisdiction: String,
    civic_address: Option<String>,
}

impl GazetteerEntry {
    fn from_raw(raw: RawEntry) -> Result<Self, String> {
        if raw.name.trim().is_empty() {
            return Err("empty name".into());
        }
        let geometry = Geometry::from_json(&raw.geometry).map_err(|e| e.to_string())?;
        geometry.validate().map_err(|e| e.to_string())?;
        Ok(Self {
            name: raw.name,
            aliases: raw.aliases,
            geometry,
            category: raw.category,
            jurisdiction: raw.jurisdiction,
            civic_address: raw.civic_address,
        })
    }

    /// Name followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Parses JSON-lines; blank lines are skipped.
pub fn parse_gazetteer(text: &str) -> Result<Vec<GazetteerEntry>, GeocodeError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| GeocodeError::Gazetteer { line: i + 1, message };
        let raw: RawEntry = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        out.push(GazetteerEntry::from_raw(raw).map_err(bad)?);
    }
    Ok(out)
}

/// Case-folds, drops punctuation and collapses whitespace.
pub fn normalize_name(text: &str) -> String {
    name_tokens(text).join(" ")
}

fn name_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == '-' || c == '/' || c == ',')
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// `|A ∩ B| / |A ∪ B|` over normalised name tokens; 0 when both are empty.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    jaccard(&token_set(a), &token_set(b))
}

fn token_set(text: &str) -> BTreeSet<String> {
    name_tokens(text).into_iter().collect()
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NameMatch {
    pub entry: usize,
    pub score: f64,
}

/// Name and uniform-grid index over an immutable set of gazetteer entries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    entries: Vec<GazetteerEntry>,
    cell_deg: f64,
    exact: HashMap<String, Vec<usize>>,
    tokens: HashMap<String, Vec<usize>>,
    /// Token set of each entry's names, in `names()` order.
    name_sets: Vec<Vec<BTreeSet<String>>>,
    cells: HashMap<(i64, i64), Vec<usize>>,
    oversized: Vec<usize>,
}

impl SpatialIndex {
    pub fn new(entries: Vec<GazetteerEntry>) -> Self {
        Self::with_cell_size(entries, DEFAULT_CELL_DEG)
    }

    pub fn with_cell_size(entries: Vec<GazetteerEntry>, cell_deg: f64) -> Self {
        assert!(cell_deg > 0.0 && cell_deg.is_finite(), "cell size must be positive");
        let mut idx = Self {
            entries: Vec::new(),
            cell_deg,
            exact: HashMap::new(),
            tokens: HashMap::new(),
            name_sets: Vec::new(),
            cells: HashMap::new(),
            oversized: Vec::new(),
        };
        for e in entries {
            idx.insert(e);
        }
        idx
    }

    pub fn bundled() -> Self {
        Self::new(parse_gazetteer(crate::bundled::GAZETTEER).expect("bundled gazetteer is well-formed"))
    }

    pub fn load(path: &Path) -> Result<Self, GeocodeError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GeocodeError::Io(path.display().to_string(), e.to_string()))?;
        Ok(Self::new(parse_gazetteer(&text)?))
    }

    fn insert(&mut self, e: GazetteerEntry) {
        let id = self.entries.len();
        for n in e.names() {
            let key = normalize_name(n);
            if key.is_empty() {
                continue;
            }
            push_unique(self.exact.entry(key).or_default(), id);
            for t in name_tokens(n) {
                push_unique(self.tokens.entry(t).or_default(), id);
            }
        }
        self.name_sets.push(e.names().map(token_set).collect());
        let (min_lat, min_lon, max_lat, max_lon) = e.geometry.bbox();
        let (r0, c0) = self.cell_of(min_lat, min_lon);
        let (r1, c1) = self.cell_of(max_lat, max_lon);
        let count = (r1 - r0 + 1) as u64 * (c1 - c0 + 1) as u64;
        if count > MAX_CELLS_PER_ENTRY {
            self.oversized.push(id);
        } else {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    self.cells.entry((r, c)).or_default().push(id);
                }
            }
        }
        self.entries.push(e);
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (i64, i64) {
        ((lat / self.cell_deg).floor() as i64, (lon / self.cell_deg).floor() as i64)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> &GazetteerEntry {
        &self.entries[id]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_deg
    }

    /// Exact name or alias hits score 1.0; otherwise entries sharing a token
    /// score the best token Jaccard over their names. Sorted by descending
    /// score, then entry name.
    pub fn lookup(&self, text: &str) -> Vec<NameMatch> {
        let key = normalize_name(text);
        if key.is_empty() {
            return Vec::new();
        }
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for id in self.exact.get(&key).into_iter().flatten() {
            scores.insert(*id, 1.0);
        }
        let query = token_set(text);
        for t in &query {
            for id in self.tokens.get(t).into_iter().flatten() {
                scores
                    .entry(*id)
                    .or_insert_with(|| self.name_sets[*id].iter().map(|n| jaccard(&query, n)).fold(0.0, f64::max));
            }
        }
        let mut out: Vec<NameMatch> =
            scores.into_iter().filter(|(_, s)| *s > 0.0).map(|(entry, score)| NameMatch { entry, score }).collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| self.entries[a.entry].name.cmp(&self.entries[b.entry].name))
                .then(a.entry.cmp(&b.entry))
        });
        out
    }

    /// Entries whose geometry lies within `radius_m` of `center`, ascending id.
    pub fn within_radius(&self, center: LatLon, radius_m: f64) -> Vec<usize> {
        let Some(candidates) = self.grid_candidates(center, radius_m) else {
            return self.scan_radius(center, radius_m);
        };
        let p = Geometry::Point(center);
        candidates
            .into_iter()
            .filter(|id| geo::geometry_distance_m(&p, &self.entries[*id].geometry) <= radius_m)
            .collect()
    }

    /// Reference implementation: tests every entry.
    pub fn scan_radius(&self, center: LatLon, radius_m: f64) -> Vec<usize> {
        let p = Geometry::Point(center);
        (0..self.entries.len())
            .filter(|id| geo::geometry_distance_m(&p, &self.entries[*id].geometry) <= radius_m)
            .collect()
    }

    /// Ids from every cell overlapping the circle's bounding box, padded by
    /// one cell. `None` when the box reaches a pole or the antimeridian or is
    /// too large to enumerate.
    fn grid_candidates(&self, center: LatLon, radius_m: f64) -> Option<BTreeSet<usize>> {
        let ang = radius_m / EARTH_RADIUS_M;
        if !ang.is_finite() || ang >= std::f64::consts::FRAC_PI_2 {
            return None;
        }
        let dlat = ang.to_degrees();
        let (lat0, lat1) = (center.lat - dlat, center.lat + dlat);
        if lat0 <= -90.0 || lat1 >= 90.0 {
            return None;
        }
        let s = ang.sin() / center.lat.to_radians().cos();
        if s >= 1.0 {
            return None;
        }
        let dlon = s.asin().to_degrees();
        let (lon0, lon1) = (center.lon - dlon, center.lon + dlon);
        if lon0 < -180.0 || lon1 > 180.0 {
            return None;
        }
        let (r0, c0) = self.cell_of(lat0, lon0);
        let (r1, c1) = self.cell_of(lat1, lon1);
        let (r0, c0, r1, c1) = (r0 - 1, c0 - 1, r1 + 1, c1 + 1);
        if (r1 - r0 + 1) as u64 * (c1 - c0 + 1) as u64 > MAX_CELLS_PER_QUERY {
            return None;
        }
        let mut out: BTreeSet<usize> = self.oversized.iter().copied().collect();
        for r in r0..=r1 {
            for c in c0..=c1 {
                if let Some(ids) = self.cells.get(&(r, c)) {
                    out.extend(ids);
                }
            }
        }
        Some(out)
    }
}

fn push_unique(v: &mut Vec<usize>, id: usize) {
    if v.last() != Some(&id) {
        v.push(id);
    }
}
