//! Generators and independent oracles shared by the integration tests and
//! the acceptance runner. Nothing here calls the library code it checks:
//! distances, hashing, tokenisation and scoring are written out again.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use chrono::{DateTime, FixedOffset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use eido_idx::correlator::{CorrelationConfig, Correlator, IncidentBook, IncidentContext};
use eido_idx::model::{
    CallComponent, EidoDocument, Geometry, IncidentComponent, IncidentStatus, LatLon, LocationComponent,
    NotesComponent, PersonComponent, ResourceComponent, ResourceStatusComponent, Timestamp, UnitStatus,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub const EIDO_FIXTURES: &[&str] =
    &["nws_flood_warning.json", "news_report.json", "vendor_extras.json", "minimal.json"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const WORDS: &[&str] = &[
    "flood",
    "rain",
    "power",
    "outage",
    "roadway",
    "fire",
    "smoke",
    "robbery",
    "armed",
    "collision",
    "vehicle",
    "river",
    "storm",
    "medical",
    "caller",
    "suspect",
    "bridge",
    "closed",
    "injured",
    "evacuate",
];

pub fn phrase(rng: &mut impl Rng, max_words: usize) -> String {
    let n = rng.gen_range(0..=max_words);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Epoch seconds at a whole-quarter-hour offset.
pub fn timestamp(secs: i64, offset_quarters: i32) -> Timestamp {
    let off = FixedOffset::east_opt(offset_quarters * 900).unwrap();
    Timestamp::new(DateTime::from_timestamp(secs, 0).unwrap().with_timezone(&off))
}

pub fn epoch(t: &Timestamp) -> i64 {
    t.inner().timestamp()
}

// ---------------------------------------------------------------------------
// Scoring oracle

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Raw term counts per hashed bucket.
pub fn oracle_counts(text: &str, dim: u64) -> HashMap<u64, f64> {
    let mut m = HashMap::new();
    for t in oracle_tokens(text) {
        *m.entry(fnv1a64(t.as_bytes()) % dim).or_insert(0.0) += 1.0;
    }
    m
}

pub fn oracle_cosine(a: &HashMap<u64, f64>, b: &HashMap<u64, f64>) -> f64 {
    let dot: f64 = a.iter().map(|(k, x)| x * b.get(k).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub const R_EARTH: f64 = 6_371_008.8;

pub fn oracle_haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dp = p2 - p1;
    let dl = (b.1 - a.1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R_EARTH * h.sqrt().min(1.0).asin()
}

/// A report reduced to what scoring looks at.
#[derive(Debug, Clone)]
pub struct ODoc {
    pub id: String,
    pub t: i64,
    pub offset_quarters: i32,
    /// (lat, lon)
    pub point: Option<(f64, f64)>,
    pub text: String,
}

impl ODoc {
    pub fn to_document(&self) -> EidoDocument {
        let mut d = EidoDocument::new(self.id.clone(), timestamp(self.t, self.offset_quarters));
        if !self.text.is_empty() {
            d.incident.incident_type = Some(self.text.clone());
        }
        if let Some((lat, lon)) = self.point {
            d.locations.push(LocationComponent {
                location_id: "L1".into(),
                geometry: Some(Geometry::Point(LatLon::new(lat, lon))),
                ..Default::default()
            });
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct OIncident {
    pub members: Vec<ODoc>,
}

#[derive(Debug, Clone, Copy)]
pub struct OParams {
    pub weights: [f64; 3],
    pub tau: f64,
    pub h_t: f64,
    pub h_g: f64,
}

impl OParams {
    pub fn config(&self) -> CorrelationConfig {
        CorrelationConfig {
            weights: self.weights,
            tau: self.tau,
            temporal_half_life_s: self.h_t,
            spatial_half_life_m: self.h_g,
            candidate_window_s: f64::INFINITY,
            spatial_gate_m: f64::INFINITY,
            ..CorrelationConfig::default()
        }
    }
}

/// Weighted similarity with missing modalities dropped and the remaining
/// weights rescaled to sum to one.
pub fn oracle_sigma(p: &OParams, new: &ODoc, inc: &OIncident) -> f64 {
    let latest = inc.members.iter().map(|m| m.t).max().unwrap();
    let dt = (new.t - latest).abs() as f64;
    let f_t = 0.5f64.powf(dt / p.h_t);

    let f_g = new.point.and_then(|a| {
        inc.members
            .iter()
            .filter_map(|m| m.point)
            .map(|b| oracle_haversine(a, b))
            .reduce(f64::min)
            .map(|d| 0.5f64.powf(d / p.h_g))
    });

    let nv = oracle_counts(&new.text, 4096);
    let mvs: Vec<_> = inc.members.iter().map(|m| oracle_counts(&m.text, 4096)).collect();
    let f_s = (!nv.is_empty() && mvs.iter().any(|v| !v.is_empty()))
        .then(|| mvs.iter().map(|v| oracle_cosine(&nv, v).max(0.0)).fold(0.0, f64::max));

    let [wt, wg, ws] = p.weights;
    let mut num = wt * f_t;
    let mut den = wt;
    if let Some(g) = f_g {
        num += wg * g;
        den += wg;
    }
    if let Some(s) = f_s {
        num += ws * s;
        den += ws;
    }
    num / den
}

/// Exhaustive argmax: highest score, near-ties to the earliest created, then
/// the smallest id; link when the winner reaches the threshold.
pub fn oracle_decision(p: &OParams, new: &ODoc, incidents: &[(String, OIncident)]) -> Option<String> {
    let scores: Vec<f64> = incidents.iter().map(|(_, i)| oracle_sigma(p, new, i)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (k, s) in scores.iter().enumerate() {
        if *s < max - 1e-9 {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (cb, ck) = (incidents[b].1.members[0].t, incidents[k].1.members[0].t);
                if ck < cb || (ck == cb && incidents[k].0 < incidents[b].0) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.filter(|b| scores[*b] >= p.tau).map(|b| incidents[b].0.clone())
}

pub struct Scenario {
    pub params: OParams,
    pub incidents: Vec<OIncident>,
    pub new: ODoc,
}

fn random_odoc(rng: &mut impl Rng, id: String, base_t: i64) -> ODoc {
    let (lat0, lon0) = (32.7, -117.15);
    ODoc {
        id,
        t: base_t + rng.gen_range(-172_800..=172_800),
        offset_quarters: rng.gen_range(-48..=56),
        point: rng.gen_bool(0.8).then(|| (lat0 + rng.gen_range(-0.2..0.2), lon0 + rng.gen_range(-0.2..0.2))),
        text: phrase(rng, 6),
    }
}

pub fn random_params(rng: &mut impl Rng) -> OParams {
    let mut weights = [0.0; 3];
    for w in &mut weights {
        *w = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.05..3.0) };
    }
    if weights[0] == 0.0 {
        weights[0] = 1.0;
    }
    OParams {
        weights,
        tau: rng.gen_range(0.05..0.95),
        h_t: rng.gen_range(600.0..86_400.0),
        h_g: rng.gen_range(100.0..20_000.0),
    }
}

pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let base = 1_767_225_600;
    let n = rng.gen_range(1..=8);
    let incidents = (0..n)
        .map(|i| OIncident {
            members: (0..rng.gen_range(1..=4)).map(|j| random_odoc(rng, format!("E{i}-{j}"), base)).collect(),
        })
        .collect();
    // sometimes copy an existing report so strong matches occur
    let mut new = random_odoc(rng, "NEW".into(), base);
    if rng.gen_bool(0.3) {
        let incs: &Vec<OIncident> = &incidents;
        let src = incs.choose(rng).unwrap().members.choose(rng).unwrap();
        new = ODoc { id: "NEW".into(), t: src.t + rng.gen_range(-600..=600), ..src.clone() };
    }
    Scenario { params: random_params(rng), incidents, new }
}

/// Engine-side incidents built from the same reports, in scenario order.
pub fn build_book(correlator: &Correlator, incidents: &[OIncident]) -> (IncidentBook, Vec<String>) {
    let mut book = IncidentBook::new();
    let mut ids = Vec::new();
    for inc in incidents {
        let first = inc.members[0].to_document();
        let id = book.open(&first, correlator.vectorize(&first));
        for m in &inc.members[1..] {
            let d = m.to_document();
            book.link(&id, &d, correlator.vectorize(&d));
        }
        ids.push(id);
    }
    (book, ids)
}

pub fn labelled(ids: &[String], incidents: &[OIncident]) -> Vec<(String, OIncident)> {
    ids.iter().cloned().zip(incidents.iter().cloned()).collect()
}

// ---------------------------------------------------------------------------
// Random documents

fn text(rng: &mut impl Rng) -> String {
    const ODD: &[&str] = &["comma, inside", "quote \"here\"", "line\nbreak", "ümlaut café", "tab\there", "semi;colon"];
    let mut s = phrase(rng, 5);
    if rng.gen_bool(0.3) {
        s.push(' ');
        s.push_str(ODD.choose(rng).unwrap());
    }
    if s.trim().is_empty() {
        s = WORDS.choose(rng).unwrap().to_string();
    }
    s
}

fn json_value(rng: &mut impl Rng, depth: u32) -> Value {
    match rng.gen_range(0..if depth > 1 { 5 } else { 7 }) {
        0 => json!(rng.gen_range(-1000i64..1000)),
        1 => json!(rng.gen_range(-1e6..1e6f64)),
        2 => json!(rng.gen_bool(0.5)),
        3 => json!(text(rng)),
        4 => Value::Null,
        5 => Value::Array((0..rng.gen_range(0..3)).map(|_| json_value(rng, depth + 1)).collect()),
        _ => {
            let mut m = Map::new();
            for i in 0..rng.gen_range(0..3) {
                m.insert(format!("k{i}"), json_value(rng, depth + 1));
            }
            Value::Object(m)
        }
    }
}

fn extras(rng: &mut impl Rng) -> BTreeMap<String, Value> {
    const KEYS: &[&str] = &["vendorCode", "xFlag", "shiftLabel", "legacy_field", "agency.sub"];
    let mut m = BTreeMap::new();
    for _ in 0..rng.gen_range(0..3) {
        m.insert(KEYS.choose(rng).unwrap().to_string(), json_value(rng, 0));
    }
    m
}

fn geometry(rng: &mut impl Rng) -> Geometry {
    let lat = rng.gen_range(-60.0..60.0);
    let lon = rng.gen_range(-170.0..170.0);
    if rng.gen_bool(0.6) {
        Geometry::Point(LatLon::new(lat, lon))
    } else {
        let n = rng.gen_range(3..7);
        let mut ring: Vec<LatLon> = (0..n)
            .map(|k| {
                let a = k as f64 / n as f64 * std::f64::consts::TAU;
                let r = rng.gen_range(0.01..0.5);
                LatLon::new(lat + r * a.sin(), lon + r * a.cos())
            })
            .collect();
        ring.push(ring[0]);
        Geometry::Polygon(ring)
    }
}

fn ts(rng: &mut impl Rng) -> Timestamp {
    timestamp(1_767_225_600 + rng.gen_range(-100_000..100_000), rng.gen_range(-48..=56))
}

/// A valid document using every component kind with random optional
/// members, extras and awkward text.
pub fn random_document(rng: &mut impl Rng, eido_id: &str) -> EidoDocument {
    let mut d = EidoDocument::new(eido_id, ts(rng));
    d.source_descriptor = rng.gen_bool(0.7).then(|| text(rng));
    d.extras = extras(rng);
    d.incident = IncidentComponent {
        incident_type: rng.gen_bool(0.8).then(|| {
            ["Weather.Flood", "ROBBERY-ARMED", "MEDICAL", "Utility.PowerOutage", "FIRE-STRUCTURE"]
                .choose(rng)
                .unwrap()
                .to_string()
        }),
        priority: rng.gen_bool(0.6).then(|| rng.gen_range(1..=5)),
        status: rng.gen_bool(0.5).then(|| *IncidentStatus::ALL.choose(rng).unwrap()),
        disposition: rng.gen_bool(0.5).then(|| text(rng)),
        tracking_id: rng.gen_bool(0.5).then(|| format!("T-{}", rng.gen_range(0..99999))),
        extras: extras(rng),
    };
    for i in 0..rng.gen_range(0..4) {
        let mut loc = LocationComponent {
            location_id: format!("L{i}"),
            geometry: rng.gen_bool(0.6).then(|| geometry(rng)),
            civic_address: rng.gen_bool(0.5).then(|| text(rng)),
            description: rng.gen_bool(0.5).then(|| text(rng)),
            confidence: rng.gen_bool(0.4).then(|| rng.gen_range(0.0..=1.0)),
            extras: extras(rng),
        };
        if loc.geometry.is_none() && loc.civic_address.is_none() && loc.description.is_none() {
            loc.description = Some(text(rng));
        }
        d.locations.push(loc);
    }
    for i in 0..rng.gen_range(0..3) {
        d.calls.push(CallComponent {
            call_id: format!("C{i}"),
            start: ts(rng),
            source_text: rng.gen_bool(0.5).then(|| text(rng)),
            extras: extras(rng),
        });
    }
    for i in 0..rng.gen_range(0..4) {
        d.resources.push(ResourceComponent {
            resource_id: format!("R{i}"),
            unit_identifier: format!("U{}", rng.gen_range(1..30)),
            extras: extras(rng),
        });
    }
    if !d.resources.is_empty() {
        for i in 0..rng.gen_range(0..4) {
            let r = d.resources.choose(rng).unwrap().resource_id.clone();
            d.resource_statuses.push(ResourceStatusComponent {
                status_id: format!("S{i}"),
                resource_id: r,
                status: *UnitStatus::ALL.choose(rng).unwrap(),
                status_time: ts(rng),
                extras: extras(rng),
            });
        }
    }
    for i in 0..rng.gen_range(0..4) {
        let location_ref = if d.locations.is_empty() || rng.gen_bool(0.5) {
            None
        } else {
            Some(d.locations.choose(rng).unwrap().location_id.clone())
        };
        d.notes.push(NotesComponent {
            note_id: format!("N{i}"),
            comments: text(rng),
            timestamp: ts(rng),
            location_ref,
            extras: extras(rng),
        });
    }
    for i in 0..rng.gen_range(0..3) {
        d.persons.push(PersonComponent {
            person_id: format!("P{i}"),
            role_text: text(rng),
            name_text: rng.gen_bool(0.5).then(|| text(rng)),
            extras: extras(rng),
        });
    }
    d
}

// ---------------------------------------------------------------------------
// Deep compare modulo component ids

const ID_KEYS: &[(&str, &str)] = &[
    ("locationId", "location"),
    ("callId", "call"),
    ("resourceId", "resource"),
    ("resourceStatusId", "status"),
    ("noteId", "note"),
    ("personId", "person"),
];
const REF_KEYS: &[(&str, &str)] = &[("referencedResourceId", "resource"), ("locationReference", "location")];

#[derive(Default)]
struct IdMap {
    fwd: HashMap<(String, String), String>,
    back: HashMap<(String, String), String>,
    refs: Vec<(String, String, String)>,
}

impl IdMap {
    fn bind(&mut self, ns: &str, a: &str, b: &str) -> Result<(), String> {
        let f = self.fwd.entry((ns.into(), a.into())).or_insert_with(|| b.into());
        let r = self.back.entry((ns.into(), b.into())).or_insert_with(|| a.into());
        if f != b || r != a {
            return Err(format!("{ns} id {a:?} maps inconsistently to {b:?}"));
        }
        Ok(())
    }
}

fn walk(a: &Value, b: &Value, path: &str, ids: &mut IdMap) -> Result<(), String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let kx: BTreeSet<&String> = x.keys().collect();
            let ky: BTreeSet<&String> = y.keys().collect();
            if kx != ky {
                return Err(format!("{path}: keys {kx:?} vs {ky:?}"));
            }
            for (k, va) in x {
                let vb = &y[k];
                let sub = format!("{path}.{k}");
                if let Some((_, ns)) = ID_KEYS.iter().find(|(n, _)| n == k) {
                    match (va.as_str(), vb.as_str()) {
                        (Some(p), Some(q)) => ids.bind(ns, p, q)?,
                        _ => return Err(format!("{sub}: id is not a string")),
                    }
                } else if let Some((_, ns)) = REF_KEYS.iter().find(|(n, _)| n == k) {
                    match (va.as_str(), vb.as_str()) {
                        (Some(p), Some(q)) => ids.refs.push((ns.to_string(), p.into(), q.into())),
                        _ => return Err(format!("{sub}: reference is not a string")),
                    }
                } else {
                    walk(va, vb, &sub, ids)?;
                }
            }
            Ok(())
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: length {} vs {}", x.len(), y.len()));
            }
            x.iter().zip(y).enumerate().try_for_each(|(i, (p, q))| walk(p, q, &format!("{path}[{i}]"), ids))
        }
        (Value::Number(x), Value::Number(y)) => {
            if x.as_f64() == y.as_f64() && x.is_f64() == y.is_f64() {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

/// Structural equality of two JSON documents where component ids may differ
/// by a consistent renaming, and references follow that renaming. Ids
/// are compared per document (the renaming restarts for each eidoId).
pub fn deep_equal_modulo_ids(a: &Value, b: &Value) -> Result<(), String> {
    let mut ids = IdMap::default();
    walk(a, b, "$", &mut ids)?;
    for (ns, p, q) in &ids.refs {
        match ids.fwd.get(&(ns.clone(), p.clone())) {
            Some(m) if m == q => {}
            other => return Err(format!("{ns} reference {p:?} -> {q:?}, id maps to {other:?}")),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Composite oracle

pub struct RandomIncident {
    pub docs: Vec<EidoDocument>,
    pub context: IncidentContext,
}

pub fn random_incident(rng: &mut impl Rng, correlator: &Correlator, tag: usize) -> RandomIncident {
    const UNITS: &[&str] = &["E1", "E2", "M7", "T3", "B1", "PD-12", "PD-40", "CHP-9"];
    let base = 1_767_225_600;
    let n = rng.gen_range(1..=6);
    let mut docs = Vec::new();
    for k in 0..n {
        // a coarse time grid makes equal note timestamps common
        let mut d = EidoDocument::new(format!("I{tag}-E{k}"), timestamp(base + rng.gen_range(0..8) * 300, 0));
        let units: BTreeSet<&str> = (0..rng.gen_range(0..4)).map(|_| *UNITS.choose(rng).unwrap()).collect();
        for (i, u) in units.into_iter().enumerate() {
            d.resources.push(ResourceComponent {
                resource_id: format!("R{i}"),
                unit_identifier: u.to_string(),
                extras: Default::default(),
            });
        }
        let mut note_ids: Vec<usize> = (0..5).collect();
        note_ids.shuffle(rng);
        for id in note_ids.into_iter().take(rng.gen_range(0..4)) {
            d.notes.push(NotesComponent {
                note_id: format!("N{id}"),
                comments: format!("note {id} of {k}: {}", phrase(rng, 3)),
                timestamp: timestamp(base + rng.gen_range(0..4) * 600, rng.gen_range(-8..=8) * 4),
                location_ref: None,
                extras: Default::default(),
            });
        }
        docs.push(d);
    }
    let mut ctx = IncidentContext::open(format!("INC-{tag}"), &docs[0], correlator.vectorize(&docs[0]));
    for d in &docs[1..] {
        ctx.absorb(d, correlator.vectorize(d));
    }
    RandomIncident { docs, context: ctx }
}

/// Union of unit identifiers by nested loops.
pub fn brute_units(docs: &[EidoDocument]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for d in docs {
        for r in &d.resources {
            if !out.contains(&r.unit_identifier) {
                out.push(r.unit_identifier.clone());
            }
        }
    }
    out.sort();
    out
}

/// (sourceEidoId, noteId) in narrative order: insertion sort, which is
/// stable, keyed by instant, then arrival, then note id.
pub fn brute_narrative(docs: &[EidoDocument]) -> Vec<(String, String)> {
    let mut items: Vec<(i64, usize, String, String)> = Vec::new();
    for (arrival, d) in docs.iter().enumerate() {
        for n in &d.notes {
            items.push((epoch(&n.timestamp), arrival, n.note_id.clone(), d.eido_id.clone()));
        }
    }
    for i in 1..items.len() {
        let mut j = i;
        while j > 0 && (items[j].0, items[j].1, &items[j].2) < (items[j - 1].0, items[j - 1].1, &items[j - 1].2) {
            items.swap(j, j - 1);
            j -= 1;
        }
    }
    items.into_iter().map(|(_, _, n, e)| (e, n)).collect()
}
