use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{FeatureKind, FeatureRow, TabularError};

pub const MANIFEST_FILE: &str = "manifest.json";
const KIND_COL: &str = "featureKind";
const EIDO_COL: &str = "eidoId";
const ID_COL: &str = "componentId";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestFile {
    pub file: String,
    pub feature_kind: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub files: Vec<ManifestFile>,
    pub documents: usize,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> TabularError {
    TabularError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Header for a set of rows: the three key columns, then attributes sorted.
fn header(rows: &[&FeatureRow]) -> Vec<String> {
    let attrs: BTreeSet<&str> = rows.iter().flat_map(|r| r.attributes.keys().map(String::as_str)).collect();
    [KIND_COL, EIDO_COL, ID_COL].into_iter().chain(attrs).map(str::to_string).collect()
}

/// Writes rows as one CSV table; absent cells are empty.
pub fn write_csv<W: Write>(rows: &[&FeatureRow], out: W) -> Result<Vec<String>, csv::Error> {
    let cols = header(rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in rows {
        let record = cols.iter().map(|c| match c.as_str() {
            KIND_COL => r.kind.as_str(),
            EIDO_COL => r.eido_id.as_str(),
            ID_COL => r.component_id.as_str(),
            attr => r.attributes.get(attr).map_or("", String::as_str),
        });
        w.write_record(record)?;
    }
    w.flush()?;
    Ok(cols)
}

/// Reads a CSV table with a `featureKind` column, or without one when
/// `default_kind` says what every row is.
pub fn read_csv<R: Read>(input: R, default_kind: Option<FeatureKind>) -> Result<Vec<FeatureRow>, TabularError> {
    let mut rdr = csv::Reader::from_reader(input);
    let bad = |row: usize, message: String| TabularError::BadRow { row, message };
    let headers: Vec<String> = rdr.headers().map_err(|e| bad(0, e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(i + 1, e.to_string()))?;
        let cells = headers.iter().map(String::as_str).zip(rec.iter()).map(|(h, v)| (h, Value::String(v.into())));
        rows.push(row_from_cells(i + 1, cells, default_kind)?);
    }
    Ok(rows)
}

fn row_from_cells<K: AsRef<str>>(
    row: usize,
    cells: impl Iterator<Item = (K, Value)>,
    default_kind: Option<FeatureKind>,
) -> Result<FeatureRow, TabularError> {
    let bad = |message: String| TabularError::BadRow { row, message };
    let mut kind = default_kind;
    let (mut eido_id, mut component_id) = (None, String::new());
    let mut attributes = BTreeMap::new();
    for (col, v) in cells {
        let text = match v {
            Value::Null => continue,
            Value::String(s) => s,
            other => other.to_string(),
        };
        match col.as_ref() {
            KIND_COL => {
                let k = FeatureKind::parse(&text).ok_or_else(|| bad(format!("unknown featureKind {text:?}")))?;
                if default_kind.is_some_and(|d| d != k) {
                    return Err(bad(format!("featureKind {text:?} in a {} table", default_kind.unwrap())));
                }
                kind = Some(k);
            }
            EIDO_COL => eido_id = Some(text),
            ID_COL => component_id = text,
            _ if text.is_empty() => {}
            attr => {
                attributes.insert(attr.to_string(), text);
            }
        }
    }
    let kind = kind.ok_or_else(|| bad("missing featureKind".into()))?;
    let eido_id = eido_id.filter(|e| !e.is_empty()).ok_or_else(|| bad("missing eidoId".into()))?;
    Ok(FeatureRow { kind, eido_id, component_id, attributes })
}

/// One flat JSON object per row.
pub fn write_jsonl<W: Write>(rows: &[FeatureRow], mut out: W) -> std::io::Result<()> {
    for r in rows {
        let mut m = Map::new();
        m.insert(KIND_COL.into(), Value::String(r.kind.as_str().into()));
        m.insert(EIDO_COL.into(), Value::String(r.eido_id.clone()));
        m.insert(ID_COL.into(), Value::String(r.component_id.clone()));
        for (k, v) in &r.attributes {
            m.insert(k.clone(), Value::String(v.clone()));
        }
        writeln!(out, "{}", Value::Object(m))?;
    }
    Ok(())
}

pub fn read_jsonl<R: Read>(input: R) -> Result<Vec<FeatureRow>, TabularError> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let bad = |message: String| TabularError::BadRow { row: i + 1, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: Map<String, Value> = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        rows.push(row_from_cells(i + 1, obj.into_iter(), None)?);
    }
    Ok(rows)
}

/// Writes `<kind>.csv` for each kind present plus `manifest.json`.
pub fn export_dir(rows: &[FeatureRow], dir: &Path) -> Result<Manifest, TabularError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for kind in FeatureKind::ALL {
        let of_kind: Vec<&FeatureRow> = rows.iter().filter(|r| r.kind == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        let name = format!("{}.csv", kind.as_str());
        let path = dir.join(&name);
        let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let columns = write_csv(&of_kind, file).map_err(|e| io_err(&path, e))?;
        files.push(ManifestFile { file: name, feature_kind: kind.as_str().into(), rows: of_kind.len(), columns });
    }
    let documents = rows.iter().map(|r| r.eido_id.as_str()).collect::<BTreeSet<_>>().len();
    let manifest = Manifest { files, documents };
    let path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Reads an export directory (kind files in canonical kind order), a single
/// CSV with a `featureKind` column, or a JSON-lines stream.
pub fn import_path(path: &Path) -> Result<Vec<FeatureRow>, TabularError> {
    if path.is_dir() {
        let mut rows = Vec::new();
        for kind in FeatureKind::ALL {
            let file = path.join(format!("{}.csv", kind.as_str()));
            if !file.exists() {
                continue;
            }
            let f = std::fs::File::open(&file).map_err(|e| io_err(&file, e))?;
            rows.extend(read_csv(f, Some(kind)).map_err(|e| io_err(&file, e))?);
        }
        return Ok(rows);
    }
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(f, None),
        _ => read_jsonl(f),
    }
}
