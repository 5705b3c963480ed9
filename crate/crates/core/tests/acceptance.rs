//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;

use eido_idx::composite::derive_composite;
use eido_idx::config::PipelineConfig;
use eido_idx::correlator::{CorrelationConfig, Correlator, Decision};
use eido_idx::geocoder::{GazetteerEntry, Geocoder, SpatialIndex};
use eido_idx::model::{
    document_to_value, parse_document, serialize_document, Geometry, LatLon, Timestamp, UnitStatus, Validator,
};
use eido_idx::pipeline::Engine;
use eido_idx::store::Store;
use eido_idx::tabular::{compose, export_dir, flatten_all, import_path};
use eido_idx::transform::{read_cad_csv, TransformOptions, Transformer};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn cad_sample() -> Outcome {
    let start = Instant::now();
    let t = Transformer::bundled(TransformOptions::default());
    let records = read_cad_csv(fixture_text("cad_sample.csv").as_bytes()).map_err(|e| e.to_string())?;
    let docs: Vec<_> = records
        .iter()
        .map(|r| t.transform_record(r).map(|x| x.document))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ts = |s: &str| Timestamp::parse(s).unwrap();
    let (a, b) = (&docs[0], &docs[1]);
    let mut passed = 0;

    ensure!(a.incident.incident_type.as_deref() == Some("ROBBERY-ARMED"), "211A -> {:?}", a.incident.incident_type);
    passed += 1;
    let note = "Caller reports armed robbery at Kobey's Swap Meet. Suspect fled toward Old Town. Officer Ramirez requested backup.";
    ensure!(a.notes.first().map(|n| n.comments.as_str()) == Some(note), "note copy: {:?}", a.notes);
    passed += 1;
    ensure!(a.issued.to_string() == "2026-01-01T12:00:00+00:00", "timestamp: {}", a.issued);
    passed += 1;
    ensure!(a.incident.priority == Some(1) && b.incident.priority == Some(1), "priorities");
    passed += 1;
    ensure!(a.locations[0].description.as_deref() == Some("Sector 4"), "beat: {:?}", a.locations[0].description);
    passed += 1;
    ensure!(a.incident.disposition.as_deref() == Some("Advised"), "ADV -> {:?}", a.incident.disposition);
    passed += 1;
    let s = &a.resource_statuses;
    ensure!(
        a.resources[0].unit_identifier == "E17"
            && s[0].status == UnitStatus::OnScene
            && s[0].status_time == ts("2026-01-01T12:09:00+00:00")
            && s[0].resource_id == a.resources[0].resource_id,
        "arrival status: {s:?}"
    );
    passed += 1;
    let on_scene = |d: &eido_idx::EidoDocument| {
        d.resource_statuses[1].status_time.since(&d.resource_statuses[0].status_time).num_seconds()
    };
    ensure!(
        s[1].status == UnitStatus::Cleared && on_scene(a) == 45 * 60 && on_scene(b) == 30 * 60,
        "time on scene: {} s / {} s",
        on_scene(a),
        on_scene(b)
    );
    passed += 1;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{passed}/8 rows, {took:.0?}"))
}

fn case_study() -> Outcome {
    let start = Instant::now();
    let engine = Engine::bundled();
    let prepared = engine.prepare(&[(fixture("nws_flood_warning.json"), None), (fixture("news_report.json"), None)]);
    let mut store = Store::in_memory();
    let report = engine.ingest(&mut store, &prepared);
    ensure!(report.errors.is_empty(), "errors: {:?}", report.errors);
    let snap = store.snapshot();
    ensure!(snap.incidents().len() == 1, "{} incidents", snap.incidents().len());
    let inc = &snap.incidents()[0];
    ensure!(inc.linked_eido_ids.len() == 2, "{} linked documents", inc.linked_eido_ids.len());
    let view = engine.composite(snap, &inc.incident_id).unwrap().map_err(|e| e.to_string())?;
    let text = view.to_json();
    ensure!(
        view.locations.iter().any(|l| matches!(l.geometry, Some(Geometry::Polygon(_)))),
        "no warning polygon in composite"
    );
    ensure!(view.current_type.as_deref() == Some("Weather.Flood"), "type {:?}", view.current_type);
    for needle in ["roadway flooding", "power outage"] {
        ensure!(text.contains(needle), "composite lacks {needle:?}");
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    let sigma = report.decisions[1]["ranked"][0]["sigma"].as_f64().unwrap_or(f64::NAN);
    Ok(format!("1 incident, 2 documents, link score {sigma:.4}, {took:.0?}"))
}

fn scoring_oracle() -> Outcome {
    let mut max_err: f64 = 0.0;
    let mut links = 0;
    for seed in 0..1000 {
        let s = random_scenario(&mut rng(10_000 + seed));
        let c = Correlator::new(s.params.config()).map_err(|e| e.to_string())?;
        let (book, ids) = build_book(&c, &s.incidents);
        let doc = s.new.to_document();
        let v = c.vectorize(&doc);
        for (inc, o) in book.incidents().iter().zip(&s.incidents) {
            let err = (c.score(&doc, &v, inc).sigma - oracle_sigma(&s.params, &s.new, o)).abs();
            max_err = max_err.max(err);
            ensure!(err <= 1e-9, "seed {seed}: error {err:e}");
        }
        let want = oracle_decision(&s.params, &s.new, &labelled(&ids, &s.incidents));
        let got = match c.correlate(&doc, book.incidents()).decision {
            Decision::LinkTo(id) => Some(id),
            Decision::NewIncident => None,
        };
        ensure!(got == want, "seed {seed}: engine {got:?}, argmax {want:?}");
        links += got.is_some() as usize;
    }
    Ok(format!("1000 fixtures, max |error| {max_err:.1e}, {links} links"))
}

fn properties() -> Outcome {
    const CASES: u64 = 600;
    let engine = |p: &OParams| Correlator::new(p.config()).unwrap();
    let decide = |p: &OParams, s: &Scenario| {
        let c = engine(p);
        let (book, _) = build_book(&c, &s.incidents);
        c.correlate(&s.new.to_document(), book.incidents()).decision
    };
    let mut r = rng(20_000);
    for case in 0..CASES {
        let s = random_scenario(&mut r);
        let c = engine(&s.params);
        let (book, _) = build_book(&c, &s.incidents);
        let doc = s.new.to_document();
        let v = c.vectorize(&doc);

        // bounds
        for inc in book.incidents() {
            let sigma = c.score(&doc, &v, inc).sigma;
            ensure!((0.0..=1.0).contains(&sigma), "case {case}: sigma {sigma}");
        }

        // larger time gap
        let inc = &book.incidents()[0];
        let latest = epoch(&inc.latest_activity);
        let shift = r.gen_range(1..200_000);
        let far = ODoc { t: s.new.t + if s.new.t >= latest { shift } else { -shift }, ..s.new.clone() }.to_document();
        let (a, b) = (c.score(&doc, &v, inc).sigma, c.score(&far, &c.vectorize(&far), inc).sigma);
        ensure!(b <= a + 1e-12, "case {case}: time gap raised sigma {a} -> {b}");

        // larger distance
        let anchor = ODoc { point: Some((30.0, -117.0)), ..s.incidents[0].members[0].clone() };
        let (one, _) = build_book(&c, &[OIncident { members: vec![anchor] }]);
        let d1 = r.gen_range(0.0..0.5);
        let d2 = d1 + r.gen_range(0.0..0.5);
        let at = |dlat: f64| ODoc { point: Some((30.0 + dlat, -117.0)), ..s.new.clone() }.to_document();
        let (near, farther) = (at(d1), at(d2));
        let a = c.score(&near, &c.vectorize(&near), &one.incidents()[0]).sigma;
        let b = c.score(&farther, &c.vectorize(&farther), &one.incidents()[0]).sigma;
        ensure!(b <= a + 1e-12, "case {case}: distance raised sigma {a} -> {b}");

        // weight scaling
        let k = 10f64.powf(r.gen_range(-2.0..2.0));
        let scaled = OParams { weights: s.params.weights.map(|w| w * k), ..s.params };
        ensure!(decide(&s.params, &s) == decide(&scaled, &s), "case {case}: scaling by {k} changed the decision");

        // threshold monotonicity
        let (lo, hi) = {
            let (x, y) = (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0));
            (f64::min(x, y), f64::max(x, y))
        };
        let dl = decide(&OParams { tau: lo, ..s.params }, &s);
        let dh = decide(&OParams { tau: hi, ..s.params }, &s);
        if let Decision::LinkTo(_) = &dh {
            ensure!(dl == dh, "case {case}: tau {hi} links but {lo} gives {dl:?}");
        }
    }
    Ok(format!("{CASES} cases for each of 5 properties"))
}

fn round_trips() -> Outcome {
    for name in EIDO_FIXTURES {
        let d = parse_document(&fixture_text(name)).map_err(|e| format!("{name}: {e}"))?;
        let again = parse_document(&serialize_document(&d)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(again == d, "{name}: parse(serialize(d)) != d");
    }
    let mut r = rng(30_000);
    let docs: Vec<_> = (0..200).map(|i| random_document(&mut r, &format!("RT-{i:03}"))).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    export_dir(&flatten_all(&docs), dir.path()).map_err(|e| e.to_string())?;
    let rows = import_path(dir.path()).map_err(|e| e.to_string())?;
    let back = compose(&rows, &Validator::lenient()).map_err(|e| e.to_string())?;
    ensure!(back.len() == docs.len(), "{} documents back", back.len());
    let by_id: HashMap<&str, _> = back.iter().map(|d| (d.eido_id.as_str(), d)).collect();
    for d in &docs {
        let b = by_id.get(d.eido_id.as_str()).ok_or_else(|| format!("{} missing", d.eido_id))?;
        deep_equal_modulo_ids(&document_to_value(d), &document_to_value(b))
            .map_err(|e| format!("{}: {e}", d.eido_id))?;
    }
    Ok(format!("{} fixtures, 200 random documents through CSV", EIDO_FIXTURES.len()))
}

fn composite_oracle() -> Outcome {
    let c = Correlator::new(CorrelationConfig::default()).unwrap();
    let mut r = rng(40_000);
    let mut notes = 0;
    for tag in 0..200 {
        let inc = random_incident(&mut r, &c, tag);
        let by_id: HashMap<&str, _> = inc.docs.iter().map(|d| (d.eido_id.as_str(), d)).collect();
        let view = derive_composite(&inc.context, |id| by_id.get(id).copied()).map_err(|e| e.to_string())?;
        let units: Vec<String> = view.units.iter().cloned().collect();
        ensure!(units == brute_units(&inc.docs), "incident {tag}: units {units:?}");
        let order: Vec<(String, String)> =
            view.narrative.iter().map(|n| (n.source_eido_id.clone(), n.note_id.clone())).collect();
        ensure!(order == brute_narrative(&inc.docs), "incident {tag}: narrative order");
        notes += order.len();
    }
    Ok(format!("200 incidents, {notes} narrative entries"))
}

fn geocoder() -> Outcome {
    let idx = SpatialIndex::bundled();
    let mut names = 0;
    for (id, e) in idx.entries().iter().enumerate() {
        for n in e.names() {
            names += 1;
            ensure!(idx.lookup(n).iter().any(|h| h.entry == id && h.score == 1.0), "{n:?} not an exact hit");
        }
    }

    let mut r = rng(50_000);
    let pts: Vec<(f64, f64)> = (0..3000).map(|_| (r.gen_range(32.0..33.5), r.gen_range(-118.0..-116.0))).collect();
    let grid = SpatialIndex::new(
        pts.iter()
            .enumerate()
            .map(|(i, p)| GazetteerEntry {
                name: format!("P{i}"),
                aliases: vec![],
                geometry: Geometry::Point(LatLon::new(p.0, p.1)),
                category: "poi".into(),
                jurisdiction: "Test".into(),
                civic_address: None,
            })
            .collect(),
    );
    for q in 0..100 {
        let c = (r.gen_range(31.9..33.6), r.gen_range(-118.1..-115.9));
        let radius = 10f64.powf(r.gen_range(1.0..5.0));
        let want: Vec<usize> = (0..pts.len()).filter(|i| oracle_haversine(c, pts[*i]) <= radius).collect();
        ensure!(grid.within_radius(LatLon::new(c.0, c.1), radius) == want, "query {q}: {c:?} r={radius}");
    }

    let g = Geocoder::bundled();
    for name in EIDO_FIXTURES {
        let d = parse_document(&fixture_text(name)).map_err(|e| e.to_string())?;
        let (once, _) = g.enrich_document(&d);
        ensure!(g.enrich_document(&once).0 == once, "{name}: enrichment not idempotent");
    }
    Ok(format!("{names} names exact, 100 radius queries, {} fixtures idempotent", EIDO_FIXTURES.len()))
}

fn decision_stream(tau: f64) -> Vec<(String, String)> {
    let mut cfg = PipelineConfig::default();
    cfg.correlation.tau = tau;
    let engine = Engine::from_config(&cfg).unwrap();
    let prepared = engine.prepare(&[(fixture("nws_flood_warning.json"), None), (fixture("news_report.json"), None)]);
    let report = engine.ingest(&mut Store::in_memory(), &prepared);
    report
        .decisions
        .iter()
        .map(|d| (d["decision"].as_str().unwrap().to_string(), d["incidentId"].as_str().unwrap().to_string()))
        .collect()
}

fn replay_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_eido-idx");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("case-study.jsonl");
    let arg = |p: &Path| p.to_str().unwrap().to_string();
    let status = |args: &[String]| Command::new(bin).args(args).output().map(|o| o.status.code());
    let ingest = [
        "--log".into(),
        arg(&log),
        "ingest".into(),
        arg(&fixture("nws_flood_warning.json")),
        arg(&fixture("news_report.json")),
    ];
    ensure!(status(&ingest).map_err(|e| e.to_string())? == Some(0), "ingest failed");
    let replay = |tau: Option<f64>| {
        let mut a = vec!["--log".to_string(), arg(&log)];
        if let Some(t) = tau {
            a.extend(["--tau".to_string(), t.to_string()]);
        }
        a.push("replay".into());
        status(&a).map_err(|e| e.to_string())
    };
    ensure!(replay(None)? == Some(0), "replay under the recording config did not exit 0");

    let tau = CorrelationConfig::default().tau;
    let base = decision_stream(tau);
    let mut report = Vec::new();
    for t in [tau - 0.2, tau + 0.2] {
        let differs = decision_stream(t) != base;
        let code = replay(Some(t))?;
        ensure!((code == Some(5)) == differs, "tau {t:.2}: exit {code:?}, stream differs: {differs}");
        report.push(format!("tau {t:.2} -> exit {}", code.unwrap_or(-1)));
    }
    Ok(report.join(", "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("CAD transformation rows", cad_sample),
        ("case-study linkage and composite", case_study),
        ("scoring oracle equivalence", scoring_oracle),
        ("correlation property suite", properties),
        ("round trips", round_trips),
        ("composite oracle", composite_oracle),
        ("geocoder index and enrichment", geocoder),
        ("replay determinism", replay_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
