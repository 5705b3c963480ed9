use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use eido_idx::config::PipelineConfig;
use eido_idx::correlator::Decision;
use eido_idx::model::serialize_document;
use eido_idx::pipeline::{Engine, InputFormat};
use eido_idx::store::{read_log, Durability, Snapshot, Store, StoreError};
use eido_idx::tabular::{compose, export_dir, flatten_all, import_path, write_jsonl};

const EXIT_FAILURE: u8 = 1;
const EXIT_CORRUPT_LOG: u8 = 2;
const EXIT_UNKNOWN_INCIDENT: u8 = 3;
const EXIT_TABULAR: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

/// Incident data integration over EIDO-JSON.
#[derive(Parser)]
#[command(name = "eido-idx", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Event log path; overrides the config.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// Link threshold; overrides the config.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Modality weights as t,g,s; overrides the config.
    #[arg(long, global = true, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    /// Reject unknown registry terms and unmapped codes.
    #[arg(long, global = true)]
    strict: bool,
    /// Input format for every input file: eido, csv or jsonl.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<InputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Transform, geocode, correlate and append inputs; prints one decision per line.
    Ingest { inputs: Vec<PathBuf> },
    /// Prints the composite view of an incident in the log.
    Composite { incident_id: String },
    /// Flattens EIDO-JSON documents into feature rows.
    Flatten {
        inputs: Vec<PathBuf>,
        /// Flatten the documents of this incident from the log instead.
        #[arg(long)]
        incident: Option<String>,
        /// Write per-kind CSV files and a manifest here; otherwise JSON-lines to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuilds documents from an export directory, CSV or JSON-lines rows.
    Compose { input: PathBuf },
    /// Re-runs correlation over the log and compares with the recorded decisions.
    Replay,
    /// Checks the log's integrity.
    CheckLog,
    /// Prints similarity breakdowns against the log without committing.
    Score { inputs: Vec<PathBuf> },
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three comma-separated weights t,g,s".to_string())
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    InputFormat::parse(s).ok_or_else(|| format!("unknown format {s:?}; expected eido, csv or jsonl"))
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_FAILURE, error: e.into() }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

fn store_failure(e: StoreError) -> Failure {
    let code = match e {
        StoreError::Corrupt { .. } | StoreError::SequenceGap { .. } | StoreError::Inconsistent { .. } => {
            EXIT_CORRUPT_LOG
        }
        _ => EXIT_FAILURE,
    };
    fail(code, e.into())
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(g: &Global) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(log) = &g.log {
        cfg.paths.log = Some(log.clone());
    }
    if let Some(t) = g.tau {
        cfg.correlation.tau = t;
    }
    if let Some(w) = g.weights {
        cfg.correlation.weights = w;
    }
    cfg.strict |= g.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CmdResult {
    let cfg = load_config(&cli.global)?;
    let engine = Engine::from_config(&cfg)?;
    let durability = if cfg.fsync { Durability::Fsync } else { Durability::Flush };
    let log = cfg.paths.log.as_deref();
    let format = cli.global.format;
    match cli.command {
        Command::Ingest { inputs } => ingest(&engine, log, durability, &inputs, format),
        Command::Composite { incident_id } => composite(&engine, require_log(log)?, &incident_id),
        Command::Flatten { inputs, incident, out } => flatten_cmd(&engine, log, &inputs, incident, out),
        Command::Compose { input } => compose_cmd(&engine, &input),
        Command::Replay => replay_cmd(&engine, require_log(log)?),
        Command::CheckLog => check_log(require_log(log)?),
        Command::Score { inputs } => score(&engine, log, &inputs, format),
    }
}

fn require_log(log: Option<&Path>) -> Result<&Path, Failure> {
    log.ok_or_else(|| anyhow!("no event log; pass --log or set paths.log").into())
}

fn load_snapshot(engine: &Engine, log: &Path) -> Result<Snapshot, Failure> {
    let contents = read_log(log).map_err(store_failure)?;
    Snapshot::from_records(&contents.records, engine.correlator()).map_err(store_failure)
}

fn emit(out: &mut impl Write, v: &Value) -> anyhow::Result<()> {
    writeln!(out, "{v}").context("writing standard output")
}

fn ingest(engine: &Engine, log: Option<&Path>, d: Durability, inputs: &[PathBuf], f: Option<InputFormat>) -> CmdResult {
    let mut store = match log {
        Some(p) => Store::open(p, d, engine.correlator()).map_err(store_failure)?,
        None => Store::in_memory(),
    };
    let prepared = engine.prepare(&inputs.iter().map(|p| (p.clone(), f)).collect::<Vec<_>>());
    let report = engine.ingest(&mut store, &prepared);
    let mut out = std::io::stdout().lock();
    for line in &report.decisions {
        emit(&mut out, line)?;
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    if let Some(e) = report.fatal {
        return Err(fail(EXIT_FAILURE, anyhow!(e).context("store write failed")));
    }
    if !report.errors.is_empty() {
        eprintln!("{} input record(s) failed", report.errors.len());
    }
    Ok(())
}

fn composite(engine: &Engine, log: &Path, id: &str) -> CmdResult {
    let snapshot = load_snapshot(engine, log)?;
    let view = engine
        .composite(&snapshot, id)
        .ok_or_else(|| fail(EXIT_UNKNOWN_INCIDENT, anyhow!("unknown incident {id}")))?
        .map_err(|e| fail(EXIT_CORRUPT_LOG, e.into()))?;
    println!("{}", view.to_json());
    Ok(())
}

fn flatten_cmd(
    engine: &Engine,
    log: Option<&Path>,
    inputs: &[PathBuf],
    incident: Option<String>,
    out: Option<PathBuf>,
) -> CmdResult {
    let mut docs = Vec::new();
    if let Some(id) = incident {
        let snapshot = load_snapshot(engine, require_log(log)?)?;
        let inc =
            snapshot.incident(&id).ok_or_else(|| fail(EXIT_UNKNOWN_INCIDENT, anyhow!("unknown incident {id}")))?;
        for e in &inc.linked_eido_ids {
            docs.push(snapshot.document(e).cloned().ok_or_else(|| anyhow!("log lacks document {e}"))?);
        }
    }
    for p in inputs {
        docs.extend(engine.read_documents(p).map_err(|e| fail(EXIT_TABULAR, anyhow!(e)))?);
    }
    let rows = flatten_all(&docs);
    match out {
        Some(dir) => {
            let manifest = export_dir(&rows, &dir).map_err(|e| fail(EXIT_TABULAR, e.into()))?;
            println!("{}", serde_json::to_string(&manifest).context("manifest")?);
        }
        None => write_jsonl(&rows, std::io::stdout().lock()).context("writing standard output")?,
    }
    Ok(())
}

fn compose_cmd(engine: &Engine, input: &Path) -> CmdResult {
    let tab = |e: eido_idx::tabular::TabularError| fail(EXIT_TABULAR, e.into());
    let rows = import_path(input).map_err(tab)?;
    let docs = compose(&rows, engine.validator()).map_err(tab)?;
    let mut out = std::io::stdout().lock();
    for d in &docs {
        writeln!(out, "{}", serialize_document(d)).context("writing standard output")?;
    }
    Ok(())
}

fn replay_cmd(engine: &Engine, log: &Path) -> CmdResult {
    ensure_exists(log)?;
    let contents = read_log(log).map_err(store_failure)?;
    let report = engine.replay(&contents.records).map_err(store_failure)?;
    match &report.divergence {
        None => {
            println!(
                "{}",
                json!({"status": "match", "documents": report.documents, "records": contents.records.len()})
            );
            Ok(())
        }
        Some(d) => {
            println!(
                "{}",
                json!({
                    "status": "diverged",
                    "sequence": d.sequence,
                    "expected": d.expected.as_deref().map(parse_line),
                    "recorded": d.recorded.as_deref().map(parse_line),
                })
            );
            Err(fail(EXIT_DIVERGED, anyhow!("replay diverges at sequence {}", d.sequence)))
        }
    }
}

fn parse_line(line: &str) -> Value {
    serde_json::from_str(line).unwrap_or_else(|_| Value::String(line.into()))
}

fn ensure_exists(log: &Path) -> anyhow::Result<()> {
    if !log.exists() {
        bail!("{}: no such log", log.display());
    }
    Ok(())
}

fn check_log(log: &Path) -> CmdResult {
    ensure_exists(log)?;
    let contents = read_log(log).map_err(store_failure)?;
    println!(
        "{}",
        json!({"status": "intact", "records": contents.records.len(), "tornTailBytes": contents.torn_tail_bytes})
    );
    Ok(())
}

fn score(engine: &Engine, log: Option<&Path>, inputs: &[PathBuf], f: Option<InputFormat>) -> CmdResult {
    let snapshot = match log {
        Some(p) => load_snapshot(engine, p)?,
        None => Snapshot::new(),
    };
    let prepared = engine.prepare(&inputs.iter().map(|p| (p.clone(), f)).collect::<Vec<_>>());
    let mut out = std::io::stdout().lock();
    let mut errors = 0;
    for p in &prepared {
        match &p.result {
            Ok((doc, _)) => {
                let outcome = engine.score(&snapshot, doc);
                let (decision, incident) = match &outcome.decision {
                    Decision::LinkTo(id) => ("LinkTo", Some(id.as_str())),
                    Decision::NewIncident => ("NewIncident", None),
                };
                emit(
                    &mut out,
                    &json!({
                        "source": p.source,
                        "eidoId": doc.eido_id,
                        "decision": decision,
                        "incidentId": incident,
                        "ranked": outcome.ranked,
                    }),
                )?;
            }
            Err(e) => {
                errors += 1;
                eprintln!("error: {}: {e}", p.source);
            }
        }
    }
    if errors > 0 {
        eprintln!("{errors} input record(s) failed");
    }
    Ok(())
}
