//! Run output on disk and its audit.
//!
//! A run directory holds:
//!
//! * `trace.csv`: one row per (replicate, stage, agent) with header
//!   `replicate,stage,agent,balance,delta_action,delta_rating,delta_total,staking_rate_action`.
//! * `ledger.jsonl`: one line per settled stage,
//!   `{"body":<canonical stage body>,"hash":"<hex>","prev_hash":"<hex>","replicate":<n>}`.
//! * `metadata.json`: config echo, PRNG id, code version, initial state and
//!   chain head hash of every replicate.
//! * `catalogue.csv`: `treatment,score_mean,score_sd,acceptance_rate,included`.
//!
//! [`verify_dir`] replays everything and reports the first inconsistency.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{self, CatalogueDecision};
use crate::config::SimConfig;
use crate::ledger::{verify_records, ChainStatus, Digest, StageBody, StageRecord};
use crate::policy::{self, PolicyMode};
use crate::rng::PRNG_ID;
use crate::sim::{AgentRow, RunTrace};
use crate::sweep::SweepTable;
use crate::types::{AgentId, StageOutcome, TreatmentId};

pub const TRACE_FILE: &str = "trace.csv";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const METADATA_FILE: &str = "metadata.json";
pub const CATALOGUE_FILE: &str = "catalogue.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_POINTS_FILE: &str = "sweep_points.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

pub const TRACE_HEADER: [&str; 8] = [
    "replicate",
    "stage",
    "agent",
    "balance",
    "delta_action",
    "delta_rating",
    "delta_total",
    "staking_rate_action",
];
pub const CATALOGUE_HEADER: [&str; 5] = ["treatment", "score_mean", "score_sd", "acceptance_rate", "included"];
pub const SWEEP_HEADER: [&str; 4] = ["rate", "agent", "cumulative_delta", "mode"];

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMeta {
    pub replicate: u64,
    pub stages: u64,
    pub chain_head: Digest,
    pub initial_balances: Vec<f64>,
    pub initial_staking_rates_action: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub code_version: String,
    pub prng: String,
    pub threshold: f64,
    pub config: SimConfig,
    pub replicates: Vec<ReplicateMeta>,
}

impl RunMetadata {
    pub fn from_trace(trace: &RunTrace, threshold: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            prng: PRNG_ID.to_string(),
            threshold,
            config: trace.config.clone(),
            replicates: trace
                .replicates
                .iter()
                .map(|r| ReplicateMeta {
                    replicate: r.replicate,
                    stages: r.ledger.stage_log().len() as u64,
                    chain_head: r.ledger.head(),
                    initial_balances: r.initial_agents.iter().map(|a| a.balance).collect(),
                    initial_staking_rates_action: r.initial_agents.iter().map(|a| a.staking_rate_action).collect(),
                })
                .collect(),
        }
    }
}

/// One line of `ledger.jsonl`, fields in canonical order.
pub fn ledger_line(replicate: u64, record: &StageRecord) -> String {
    format!(
        r#"{{"body":{},"hash":"{}","prev_hash":"{}","replicate":{}}}"#,
        record.body.canonical(),
        record.hash,
        record.prev_hash,
        replicate
    )
}

#[derive(Deserialize)]
struct LedgerLine {
    body: StageBody,
    hash: Digest,
    prev_hash: Digest,
    replicate: u64,
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rep in &trace.replicates {
        for row in &rep.rows {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_catalogue_csv<W: Write>(decisions: &[CatalogueDecision], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CATALOGUE_HEADER)?;
    for d in decisions {
        w.write_record([
            d.treatment.to_string(),
            d.score.to_string(),
            d.dispersion.to_string(),
            d.acceptance_rate.to_string(),
            d.included.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mode_label(mode: PolicyMode) -> &'static str {
    match mode {
        PolicyMode::NonLearning => "nonlearning",
        PolicyMode::Learning => "learning",
    }
}

/// Writes `sweep.csv` plus the per-point detail and per-grid-value summary tables.
pub fn write_sweep(dir: &Path, table: &SweepTable) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mode = mode_label(table.mode);

    let path = dir.join(SWEEP_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(SWEEP_HEADER).map_err(csv_err(&path))?;
    for p in &table.points {
        w.write_record([
            p.rate.to_string(),
            p.agent.to_string(),
            p.cumulative_delta.to_string(),
            mode.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(SWEEP_POINTS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record([
        "replicate",
        "agent",
        "assigned_rate",
        "rate",
        "final_rate",
        "cumulative_delta",
        "cumulative_action_delta",
        "mode",
    ])
    .map_err(csv_err(&path))?;
    for p in &table.points {
        w.write_record([
            p.replicate.to_string(),
            p.agent.to_string(),
            p.assigned_rate.to_string(),
            p.rate.to_string(),
            p.final_rate.to_string(),
            p.cumulative_delta.to_string(),
            p.cumulative_action_delta.to_string(),
            mode.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(SWEEP_SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["rate", "n", "mean_delta", "sd_delta", "mean_action_delta", "mode"])
        .map_err(csv_err(&path))?;
    for s in &table.summary {
        w.write_record([
            s.rate.to_string(),
            s.n.to_string(),
            s.mean_delta.to_string(),
            s.sd_delta.to_string(),
            s.mean_action_delta.to_string(),
            mode.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// Writes the four run files into `dir` (created if needed).
pub fn write_run(dir: &Path, trace: &RunTrace, threshold: f64) -> Result<Vec<CatalogueDecision>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(TRACE_FILE);
    let f = File::create(&path).map_err(io_err(&path))?;
    write_trace_csv(trace, BufWriter::new(f)).map_err(csv_err(&path))?;

    let path = dir.join(LEDGER_FILE);
    let f = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(f);
    for rep in &trace.replicates {
        for rec in rep.ledger.stage_log() {
            writeln!(w, "{}", ledger_line(rep.replicate, rec)).map_err(io_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(METADATA_FILE);
    let meta = RunMetadata::from_trace(trace, threshold);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;

    let decisions = catalogue::decide_catalogue(&catalogue::aggregate_scores(trace), threshold);
    let path = dir.join(CATALOGUE_FILE);
    let f = File::create(&path).map_err(io_err(&path))?;
    write_catalogue_csv(&decisions, BufWriter::new(f)).map_err(csv_err(&path))?;
    Ok(decisions)
}

/// Why a run directory failed verification.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("metadata missing or unreadable: {0}")]
    Metadata(String),
    #[error("{0}")]
    Inconsistent(Inconsistency),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inconsistency {
    pub replicate: Option<u64>,
    pub stage: Option<u64>,
    pub file: &'static str,
    pub reason: String,
}

impl std::fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(r) = self.replicate {
            write!(f, " replicate {r}")?;
        }
        if let Some(s) = self.stage {
            write!(f, " stage {s}")?;
        }
        write!(f, ": {}", self.reason)
    }
}

fn fail(file: &'static str, replicate: Option<u64>, stage: Option<u64>, reason: impl Into<String>) -> VerifyError {
    VerifyError::Inconsistent(Inconsistency {
        replicate,
        stage,
        file,
        reason: reason.into(),
    })
}

pub fn read_metadata(dir: &Path) -> Result<RunMetadata, VerifyError> {
    let path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| VerifyError::Metadata(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| VerifyError::Metadata(format!("{}: {e}", path.display())))
}

/// Reads `ledger.jsonl`, grouped by replicate in file order.
pub fn read_ledger(dir: &Path) -> Result<BTreeMap<u64, Vec<StageRecord>>, VerifyError> {
    let path = dir.join(LEDGER_FILE);
    let f = File::open(&path).map_err(|e| fail(LEDGER_FILE, None, None, e.to_string()))?;
    let mut out: BTreeMap<u64, Vec<StageRecord>> = BTreeMap::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| fail(LEDGER_FILE, None, None, e.to_string()))?;
        let parsed: LedgerLine =
            serde_json::from_str(&line).map_err(|e| fail(LEDGER_FILE, None, None, format!("line {}: {e}", n + 1)))?;
        out.entry(parsed.replicate).or_default().push(StageRecord {
            body: parsed.body,
            prev_hash: parsed.prev_hash,
            hash: parsed.hash,
        });
    }
    Ok(out)
}

/// Per-agent state replayed while walking the trace.
struct ReplayAgent {
    balance: f64,
    rate: f64,
}

/// Checks the ledger hash chains against the metadata heads, replays balances
/// and staking rates, and compares every trace cell with the replay.
pub fn verify_dir(dir: &Path) -> Result<(), VerifyError> {
    let meta = read_metadata(dir)?;
    let config = &meta.config;
    config
        .validate()
        .map_err(|e| fail(METADATA_FILE, None, None, e.to_string()))?;
    if meta.replicates.len() != config.n_replicates {
        return Err(fail(METADATA_FILE, None, None, "replicate count differs from config"));
    }
    let ledgers = read_ledger(dir)?;
    let expected_reps: Vec<u64> = meta.replicates.iter().map(|r| r.replicate).collect();
    if ledgers.keys().copied().collect::<Vec<_>>() != expected_reps {
        return Err(fail(LEDGER_FILE, None, None, "replicate set differs from metadata"));
    }

    for rm in &meta.replicates {
        let records = &ledgers[&rm.replicate];
        let rep = Some(rm.replicate);
        if let ChainStatus::Invalid { first_bad_stage } = verify_records(records) {
            return Err(fail(LEDGER_FILE, rep, Some(first_bad_stage.0), "hash chain broken"));
        }
        if records.len() as u64 != rm.stages || records.len() != config.n_rounds {
            return Err(fail(LEDGER_FILE, rep, None, "stage count differs from metadata"));
        }
        if records.last().map_or(Digest::ZERO, |r| r.hash) != rm.chain_head {
            return Err(fail(METADATA_FILE, rep, None, "chain head does not match ledger"));
        }
        if rm.initial_balances.len() != config.n_agents || rm.initial_staking_rates_action.len() != config.n_agents {
            return Err(fail(METADATA_FILE, rep, None, "initial state has wrong agent count"));
        }
    }

    let path = dir.join(TRACE_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| fail(TRACE_FILE, None, None, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| fail(TRACE_FILE, None, None, e.to_string()))?
        .clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(fail(TRACE_FILE, None, None, "unexpected header"));
    }
    let mut rows = reader.deserialize::<AgentRow>();

    let zero = StageOutcome::default();
    for rm in &meta.replicates {
        let rep = rm.replicate;
        let mut agents: Vec<ReplayAgent> = rm
            .initial_balances
            .iter()
            .zip(&rm.initial_staking_rates_action)
            .map(|(&balance, &rate)| ReplayAgent { balance, rate })
            .collect();
        for rec in &ledgers[&rep] {
            let stage = rec.stage().0;
            let at = |reason: String| fail(TRACE_FILE, Some(rep), Some(stage), reason);
            for (i, agent) in agents.iter_mut().enumerate() {
                let id = AgentId(i as u64);
                let out = rec.body.outcomes.get(&id).unwrap_or(&zero);
                if out.delta_total != out.delta_action + out.delta_rating {
                    return Err(fail(
                        LEDGER_FILE,
                        Some(rep),
                        Some(stage),
                        format!("agent {i}: delta_total is not the sum of its parts"),
                    ));
                }
                let fee = rec.body.fees.get(&id).copied().unwrap_or(0.0);
                if fee != 0.0 || out.delta_total != 0.0 {
                    let next = agent.balance - fee + out.delta_total;
                    let floored = rec.body.floors.iter().any(|f| f.agent == id);
                    if (next < 0.0) != floored {
                        return Err(fail(
                            LEDGER_FILE,
                            Some(rep),
                            Some(stage),
                            format!("agent {i}: floor event mismatch"),
                        ));
                    }
                    agent.balance = next.max(0.0);
                }
                if config.policy.mode == PolicyMode::Learning && rec.body.outcomes.contains_key(&id) {
                    let mut a = crate::types::Agent::doctor(id, agent.balance);
                    a.staking_rate_action = agent.rate;
                    agent.rate = policy::update_staking_policy(&a, out, &config.policy).staking_rate_action;
                }

                let row = match rows.next() {
                    Some(Ok(row)) => row,
                    Some(Err(e)) => return Err(at(format!("unreadable row: {e}"))),
                    None => return Err(at("trace ends early".into())),
                };
                let expected = AgentRow {
                    replicate: rep,
                    stage,
                    agent: i as u64,
                    balance: agent.balance,
                    delta_action: out.delta_action,
                    delta_rating: out.delta_rating,
                    delta_total: out.delta_total,
                    staking_rate_action: agent.rate,
                };
                if row != expected {
                    return Err(at(format!("agent {i}: row does not replay ({row:?})")));
                }
            }
        }
    }
    if rows.next().is_some() {
        return Err(fail(TRACE_FILE, None, None, "trailing rows after last replicate"));
    }
    Ok(())
}

/// Recomputes catalogue decisions from a run directory's ledger.
pub fn catalogue_from_dir(dir: &Path, threshold: f64) -> Result<Vec<CatalogueDecision>, VerifyError> {
    let meta = read_metadata(dir)?;
    let ledgers = read_ledger(dir)?;
    let scores: BTreeMap<TreatmentId, Vec<f64>> =
        catalogue::aggregate_records(meta.config.n_treatments, ledgers.values().map(Vec::as_slice));
    Ok(catalogue::decide_catalogue(&scores, threshold))
}
