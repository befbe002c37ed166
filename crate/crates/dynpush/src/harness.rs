//! Declarative experiment execution: parameter sweeps, replication,
//! deterministic seeding, persistence.
//!
//! A sweep is described by an [`ExperimentConfig`] (JSON, unknown keys
//! rejected). Every (grid point, replica) pair becomes one task with a
//! random stream derived by a stable hash of (experiment id, grid index,
//! replica), so results are bit-identical regardless of thread count or
//! completion order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::dyngraph::{pair_count, EvolvingModel, InitialCondition};
use crate::error::{Error, Result};
use crate::protocol::{
    default_max_rounds, run_protocol, source_only_run, Instruments, Protocol, RunRecord,
};
use crate::rng::{stable_hash64, RngStream};
use crate::stats::{summarize_values, SummaryStats};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";

/// Exact column order of the results CSV.
pub const CSV_COLUMNS: [&str; 16] = [
    "experiment_id",
    "grid_index",
    "replica",
    "n",
    "p",
    "q",
    "initial",
    "protocol",
    "seed_stream",
    "completion_round",
    "timed_out",
    "max_rounds",
    "total_messages",
    "bootstrap_round",
    "bd_violations",
    "bd_max_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RuleRepr {
    Num(f64),
    Text(String),
}

/// Birth-probability rule, evaluated per grid n.
#[derive(Debug, Clone, PartialEq)]
pub enum PRule {
    Literal(f64),
    /// c/n; "1/n" is OverN(1).
    OverN(f64),
    /// ln(n)/n.
    LogNOverN,
    /// n^−a.
    PowNeg(f64),
}

impl PRule {
    pub fn apply(&self, n: usize) -> Result<f64> {
        let n_f = n as f64;
        let p = match self {
            PRule::Literal(v) => *v,
            PRule::OverN(c) => c / n_f,
            PRule::LogNOverN => n_f.ln() / n_f,
            PRule::PowNeg(a) => n_f.powf(-a),
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!(
                "p rule yields {p} at n={n}, outside [0, 1]"
            )));
        }
        Ok(p)
    }
}

impl TryFrom<RuleRepr> for PRule {
    type Error = Error;
    fn try_from(repr: RuleRepr) -> Result<Self> {
        match repr {
            RuleRepr::Num(v) => Ok(PRule::Literal(v)),
            RuleRepr::Text(s) => {
                let t = s.trim();
                if t == "1/n" {
                    Ok(PRule::OverN(1.0))
                } else if t == "logn/n" || t == "log n/n" {
                    Ok(PRule::LogNOverN)
                } else if let Some(c) = t.strip_suffix("/n") {
                    c.parse()
                        .map(PRule::OverN)
                        .map_err(|_| Error::InvalidConfig(format!("bad p rule {s:?}")))
                } else if let Some(a) = t.strip_prefix("n^-") {
                    a.parse()
                        .map(PRule::PowNeg)
                        .map_err(|_| Error::InvalidConfig(format!("bad p rule {s:?}")))
                } else {
                    Err(Error::InvalidConfig(format!("bad p rule {s:?}")))
                }
            }
        }
    }
}

impl From<PRule> for RuleRepr {
    fn from(rule: PRule) -> Self {
        match rule {
            PRule::Literal(v) => RuleRepr::Num(v),
            PRule::OverN(c) => RuleRepr::Text(format!("{c}/n")),
            PRule::LogNOverN => RuleRepr::Text("logn/n".into()),
            PRule::PowNeg(a) => RuleRepr::Text(format!("n^-{a}")),
        }
    }
}

impl Serialize for PRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RuleRepr::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RuleRepr::deserialize(deserializer)?;
        PRule::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// Death-probability rule, evaluated per grid point (may depend on p).
#[derive(Debug, Clone, PartialEq)]
pub enum QRule {
    Literal(f64),
    /// q = 1 − p: the independent-G(n,p) regime.
    OneMinusP,
    /// q = 1/ln(n).
    InvLogN,
}

impl QRule {
    pub fn apply(&self, n: usize, p: f64) -> Result<f64> {
        let q = match self {
            QRule::Literal(v) => *v,
            QRule::OneMinusP => 1.0 - p,
            QRule::InvLogN => {
                if n < 2 {
                    return Err(Error::InvalidConfig(
                        "q rule 1/logn needs n ≥ 2".into(),
                    ));
                }
                1.0 / (n as f64).ln()
            }
        };
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!(
                "q rule yields {q} at n={n}, outside [0, 1]"
            )));
        }
        Ok(q)
    }
}

impl TryFrom<RuleRepr> for QRule {
    type Error = Error;
    fn try_from(repr: RuleRepr) -> Result<Self> {
        match repr {
            RuleRepr::Num(v) => Ok(QRule::Literal(v)),
            RuleRepr::Text(s) => match s.trim() {
                "1-p" => Ok(QRule::OneMinusP),
                "1/logn" | "1/log n" => Ok(QRule::InvLogN),
                _ => Err(Error::InvalidConfig(format!("bad q rule {s:?}"))),
            },
        }
    }
}

impl From<QRule> for RuleRepr {
    fn from(rule: QRule) -> Self {
        match rule {
            QRule::Literal(v) => RuleRepr::Num(v),
            QRule::OneMinusP => RuleRepr::Text("1-p".into()),
            QRule::InvLogN => RuleRepr::Text("1/logn".into()),
        }
    }
}

impl Serialize for QRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RuleRepr::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RuleRepr::deserialize(deserializer)?;
        QRule::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// Initial-condition rule of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialRule {
    Empty,
    Complete,
    Stationary,
    Gnp(f64),
}

impl Default for InitialRule {
    fn default() -> Self {
        InitialRule::Stationary
    }
}

impl InitialRule {
    pub fn to_condition(self) -> InitialCondition {
        match self {
            InitialRule::Empty => InitialCondition::Empty,
            InitialRule::Complete => InitialCondition::Complete,
            InitialRule::Stationary => InitialCondition::Stationary,
            InitialRule::Gnp(p0) => InitialCondition::Gnp(p0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolChoice {
    Push,
    Flooding,
    SourceOnly,
}

/// Timeout rule: "auto" (the default) or a fixed round count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxRoundsRule {
    #[default]
    Auto,
    Fixed(u32),
}

impl Serialize for MaxRoundsRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxRoundsRule::Auto => serializer.serialize_str("auto"),
            MaxRoundsRule::Fixed(v) => serializer.serialize_u32(*v),
        }
    }
}

impl<'de> Deserialize<'de> for MaxRoundsRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match RuleRepr::deserialize(deserializer)? {
            RuleRepr::Num(v) if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                Ok(MaxRoundsRule::Fixed(v as u32))
            }
            RuleRepr::Num(v) => Err(serde::de::Error::custom(format!(
                "max_rounds must be a positive integer, got {v}"
            ))),
            RuleRepr::Text(s) if s == "auto" => Ok(MaxRoundsRule::Auto),
            RuleRepr::Text(s) => Err(serde::de::Error::custom(format!(
                "bad max_rounds rule {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstrumentsConfig {
    pub bounded_degree: bool,
    pub bootstrap_gamma: Option<f64>,
    pub switch_count: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub p_rule: PRule,
    pub q_rule: QRule,
    #[serde(default)]
    pub initial: InitialRule,
}

fn default_memory_budget() -> u64 {
    2 << 30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub grid: GridSpec,
    pub protocol: ProtocolChoice,
    pub replicas: u32,
    pub master_seed: u64,
    #[serde(default)]
    pub max_rounds: MaxRoundsRule,
    #[serde(default)]
    pub instruments: InstrumentsConfig,
    #[serde(default = "default_memory_budget")]
    pub memory_budget_bytes: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < 1 {
            return Err(Error::InvalidConfig("replicas must be ≥ 1".into()));
        }
        if self.grid.n.is_empty() {
            return Err(Error::InvalidConfig("grid has no n values".into()));
        }
        for &n in &self.grid.n {
            if n < 2 {
                return Err(Error::InvalidConfig(format!("grid n={n} must be ≥ 2")));
            }
            let p = self.grid.p_rule.apply(n)?;
            let q = self.grid.q_rule.apply(n, p)?;
            if matches!(self.grid.initial, InitialRule::Stationary) && p + q == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "stationary initial undefined at n={n}: p + q = 0"
                )));
            }
            let footprint = model_footprint_bytes(n, p, q);
            if footprint > self.memory_budget_bytes {
                return Err(Error::InvalidConfig(format!(
                    "grid point n={n} needs ~{footprint} bytes, budget is {}",
                    self.memory_budget_bytes
                )));
            }
        }
        Ok(())
    }
}

/// Rough per-snapshot memory estimate used by the guard.
fn model_footprint_bytes(n: usize, p: f64, q: f64) -> u64 {
    let total = pair_count(n);
    let stationary = if p + q > 0.0 { p / (p + q) } else { p };
    let expected_edges = (stationary.max(p) * total as f64) as u64;
    let dense = if stationary > 0.1 { total / 8 } else { 0 };
    dense + expected_edges.saturating_mul(24)
}

/// One concrete unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub grid_index: usize,
    pub replica: u32,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub initial: InitialRule,
    pub protocol: ProtocolChoice,
    pub stream: RngStream,
    pub max_rounds: u32,
}

/// Expand a config into its deterministic task list. The stream id is a
/// stable hash of (experiment id, grid index, replica).
pub fn expand_grid(config: &ExperimentConfig) -> Result<Vec<Task>> {
    config.validate()?;
    let mut tasks = Vec::with_capacity(config.grid.n.len() * config.replicas as usize);
    for (grid_index, &n) in config.grid.n.iter().enumerate() {
        let p = config.grid.p_rule.apply(n)?;
        let q = config.grid.q_rule.apply(n, p)?;
        let max_rounds = match config.max_rounds {
            MaxRoundsRule::Auto => default_max_rounds(n, Some(p)),
            MaxRoundsRule::Fixed(v) => v,
        };
        for replica in 0..config.replicas {
            let stream_id = stable_hash64(&[
                config.experiment_id.as_bytes(),
                &(grid_index as u64).to_le_bytes(),
                &u64::from(replica).to_le_bytes(),
            ]);
            tasks.push(Task {
                grid_index,
                replica,
                n,
                p,
                q,
                initial: config.grid.initial,
                protocol: config.protocol,
                stream: RngStream::new(config.master_seed, stream_id),
                max_rounds,
            });
        }
    }
    Ok(tasks)
}

/// One CSV row of a result set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub grid_index: usize,
    pub replica: u32,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub initial: String,
    pub protocol: String,
    pub seed_stream: u64,
    pub completion_round: Option<u32>,
    pub timed_out: bool,
    pub max_rounds: u32,
    pub total_messages: u64,
    pub bootstrap_round: Option<u32>,
    pub bd_violations: Option<u32>,
    pub bd_max_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_index: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub stats: SummaryStats,
}

/// A completed sweep: config echo, one row per task, per-grid-point
/// summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<GridSummary>,
}

fn run_task(config: &ExperimentConfig, task: &Task) -> Result<ResultRow> {
    let initial = task.initial.to_condition();
    let model = EvolvingModel::edge_markov(task.n, task.p, task.q, initial.clone());
    let record: RunRecord = match task.protocol {
        ProtocolChoice::Push | ProtocolChoice::Flooding => {
            let protocol = if task.protocol == ProtocolChoice::Push {
                Protocol::Push
            } else {
                Protocol::Flooding
            };
            let instruments = Instruments {
                bounded_degree: config.instruments.bounded_degree,
                bootstrap_gamma: config.instruments.bootstrap_gamma,
                switch_count: config.instruments.switch_count,
            };
            run_protocol(&model, protocol, 0, task.max_rounds, task.stream, &instruments)?
        }
        ProtocolChoice::SourceOnly => {
            let gamma = config.instruments.bootstrap_gamma.unwrap_or(10.0);
            let target = ((task.n as f64).ln() * gamma).ceil().max(1.0) as usize;
            source_only_run(&model, 0, target.min(task.n), task.max_rounds, task.stream)?
        }
    };
    Ok(ResultRow {
        experiment_id: config.experiment_id.clone(),
        grid_index: task.grid_index,
        replica: task.replica,
        n: task.n,
        p: task.p,
        q: task.q,
        initial: initial.to_string(),
        protocol: record.protocol.clone(),
        seed_stream: task.stream.stream,
        completion_round: record.completion_round,
        timed_out: record.timed_out(),
        max_rounds: record.max_rounds,
        total_messages: record.messages_total,
        bootstrap_round: record.bootstrap_round,
        bd_violations: record.bounded_degree.as_ref().map(|r| r.violations),
        bd_max_ratio: record.bounded_degree.as_ref().map(|r| r.max_ratio),
    })
}

/// Execute a sweep with the given worker count. Output is independent of
/// `parallelism` and of task completion order.
pub fn execute(config: &ExperimentConfig, parallelism: usize) -> Result<ResultSet> {
    let tasks = expand_grid(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let rows: Vec<ResultRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_task(config, task))
            .collect::<Result<Vec<_>>>()
    })?;
    let summaries = summarize_rows(config, &rows)?;
    Ok(ResultSet {
        config: config.clone(),
        rows,
        summaries,
    })
}

fn summarize_rows(config: &ExperimentConfig, rows: &[ResultRow]) -> Result<Vec<GridSummary>> {
    let mut summaries = Vec::new();
    for (grid_index, &n) in config.grid.n.iter().enumerate() {
        let grid_rows: Vec<&ResultRow> = rows.iter().filter(|r| r.grid_index == grid_index).collect();
        if grid_rows.is_empty() {
            continue;
        }
        let completed: Vec<f64> = grid_rows
            .iter()
            .filter_map(|r| r.completion_round.map(f64::from))
            .collect();
        let timeouts = grid_rows.len() - completed.len();
        summaries.push(GridSummary {
            grid_index,
            n,
            p: grid_rows[0].p,
            q: grid_rows[0].q,
            stats: summarize_values(&completed, timeouts)?,
        });
    }
    Ok(summaries)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    tool_version: String,
    config: ExperimentConfig,
    row_count: usize,
    summaries: Vec<GridSummary>,
    wall_clock_seconds: f64,
}

fn fmt_opt<T: std::fmt::Display>(value: &Option<T>) -> String {
    value.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Write `results.csv` and the `results.json` sidecar into `dir`.
pub fn persist(dir: &Path, result_set: &ResultSet, wall_clock_seconds: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join(RESULTS_CSV))?;
    writer.write_record(CSV_COLUMNS)?;
    for row in &result_set.rows {
        writer.write_record([
            row.experiment_id.as_str(),
            &row.grid_index.to_string(),
            &row.replica.to_string(),
            &row.n.to_string(),
            &row.p.to_string(),
            &row.q.to_string(),
            &row.initial,
            &row.protocol,
            &row.seed_stream.to_string(),
            &fmt_opt(&row.completion_round),
            if row.timed_out { "1" } else { "0" },
            &row.max_rounds.to_string(),
            &row.total_messages.to_string(),
            &fmt_opt(&row.bootstrap_round),
            &fmt_opt(&row.bd_violations),
            &fmt_opt(&row.bd_max_ratio),
        ])?;
    }
    writer.flush()?;
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: result_set.config.clone(),
        row_count: result_set.rows.len(),
        summaries: result_set.summaries.clone(),
        wall_clock_seconds,
    };
    let mut file = std::fs::File::create(dir.join(RESULTS_JSON))?;
    file.write_all(serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} value {field:?}"),
    })
}

fn parse_opt<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<Option<T>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(field, name, line).map(Some)
    }
}

/// Read a results CSV written by [`persist`].
pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if idx == 0 {
            let header: Vec<&str> = record.iter().collect();
            if header != CSV_COLUMNS {
                return Err(Error::Parse {
                    line,
                    msg: format!("unexpected header {header:?}"),
                });
            }
            continue;
        }
        if record.len() != CSV_COLUMNS.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} columns, found {}", CSV_COLUMNS.len(), record.len()),
            });
        }
        rows.push(ResultRow {
            experiment_id: record[0].to_string(),
            grid_index: parse_field(&record[1], "grid_index", line)?,
            replica: parse_field(&record[2], "replica", line)?,
            n: parse_field(&record[3], "n", line)?,
            p: parse_field(&record[4], "p", line)?,
            q: parse_field(&record[5], "q", line)?,
            initial: record[6].to_string(),
            protocol: record[7].to_string(),
            seed_stream: parse_field(&record[8], "seed_stream", line)?,
            completion_round: parse_opt(&record[9], "completion_round", line)?,
            timed_out: &record[10] == "1",
            max_rounds: parse_field(&record[11], "max_rounds", line)?,
            total_messages: parse_field(&record[12], "total_messages", line)?,
            bootstrap_round: parse_opt(&record[13], "bootstrap_round", line)?,
            bd_violations: parse_opt(&record[14], "bd_violations", line)?,
            bd_max_ratio: parse_opt(&record[15], "bd_max_ratio", line)?,
        });
    }
    Ok(rows)
}

/// Load a persisted result set; fails on schema-version mismatch.
pub fn load(dir: &Path) -> Result<ResultSet> {
    let sidecar_text = std::fs::read_to_string(dir.join(RESULTS_JSON))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text)?;
    if sidecar.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: sidecar.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let rows = read_rows_csv(&dir.join(RESULTS_CSV))?;
    Ok(ResultSet {
        config: sidecar.config,
        rows,
        summaries: sidecar.summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config() -> ExperimentConfig {
        ExperimentConfig {
            experiment_id: "demo".into(),
            grid: GridSpec {
                n: vec![16, 32],
                p_rule: PRule::OverN(1.0),
                q_rule: QRule::Literal(0.5),
                initial: InitialRule::Stationary,
            },
            protocol: ProtocolChoice::Push,
            replicas: 3,
            master_seed: 99,
            max_rounds: MaxRoundsRule::Fixed(400),
            instruments: InstrumentsConfig::default(),
            memory_budget_bytes: default_memory_budget(),
        }
    }

    #[test]
    fn grid_expansion_is_deterministic() {
        let config = demo_config();
        let tasks = expand_grid(&config).unwrap();
        assert_eq!(tasks.len(), 6);
        assert_eq!(tasks[0].p, 1.0 / 16.0);
        assert_eq!(tasks[3].p, 1.0 / 32.0);
        let again = expand_grid(&config).unwrap();
        assert_eq!(tasks, again);
        // Distinct coordinates get distinct streams.
        let mut ids: Vec<u64> = tasks.iter().map(|t| t.stream.stream).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut config = demo_config();
        config.replicas = 0;
        assert!(matches!(config.validate(), Err(Error::InvalidConfig(_))));

        let mut config = demo_config();
        config.grid.n = vec![];
        assert!(config.validate().is_err());

        let mut config = demo_config();
        config.grid.p_rule = PRule::OverN(40.0);
        config.grid.n = vec![16];
        assert!(config.validate().is_err());

        // Dense stationary model beyond the byte budget.
        let mut config = demo_config();
        config.grid.n = vec![300_000];
        config.grid.p_rule = PRule::Literal(0.5);
        config.memory_budget_bytes = 1 << 20;
        assert!(matches!(config.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_json_round_trip_and_unknown_keys() {
        let text = r#"{
            "experiment_id": "sweep-a",
            "grid": { "n": [64, 128], "p_rule": "1/n", "q_rule": "1-p", "initial": "stationary" },
            "protocol": "push",
            "replicas": 2,
            "master_seed": 7,
            "max_rounds": "auto"
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.grid.p_rule, PRule::OverN(1.0));
        assert_eq!(config.grid.q_rule, QRule::OneMinusP);
        assert_eq!(config.max_rounds, MaxRoundsRule::Auto);
        let echoed = serde_json::to_string(&config).unwrap();
        let back = ExperimentConfig::from_json(&echoed).unwrap();
        assert_eq!(config, back);

        let with_unknown = text.replace("\"master_seed\": 7", "\"master_seed\": 7, \"bogus\": 1");
        assert!(ExperimentConfig::from_json(&with_unknown).is_err());

        let bad_rule = text.replace("\"1/n\"", "\"n/1\"");
        assert!(ExperimentConfig::from_json(&bad_rule).is_err());
    }

    #[test]
    fn rule_variants_evaluate() {
        assert_eq!(PRule::OverN(8.0).apply(64).unwrap(), 0.125);
        assert!((PRule::LogNOverN.apply(64).unwrap() - 64f64.ln() / 64.0).abs() < 1e-15);
        assert!((PRule::PowNeg(1.5).apply(64).unwrap() - 64f64.powf(-1.5)).abs() < 1e-18);
        assert_eq!(QRule::OneMinusP.apply(64, 0.125).unwrap(), 0.875);
        assert!((QRule::InvLogN.apply(64, 0.1).unwrap() - 1.0 / 64f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn execution_is_parallelism_independent() {
        let config = demo_config();
        let serial = execute(&config, 1).unwrap();
        let parallel = execute(&config, 8).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.rows.len(), 6);
        assert_eq!(serial.summaries.len(), 2);
    }

    #[test]
    fn persist_load_round_trip() {
        let config = demo_config();
        let result = execute(&config, 2).unwrap();
        let dir = std::env::temp_dir().join(format!("dynpush-harness-{}", std::process::id()));
        persist(&dir, &result, 0.25).unwrap();
        let loaded = load(&dir).unwrap();
        assert_eq!(result, loaded);

        // Re-persisting the loaded set is byte-identical.
        let dir2 = dir.join("again");
        persist(&dir2, &loaded, 1.5).unwrap();
        let a = std::fs::read(dir.join(RESULTS_CSV)).unwrap();
        let b = std::fs::read(dir2.join(RESULTS_CSV)).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_result_set_round_trips() {
        let config = demo_config();
        let empty = ResultSet {
            config: config.clone(),
            rows: vec![],
            summaries: vec![],
        };
        let dir = std::env::temp_dir().join(format!("dynpush-empty-{}", std::process::id()));
        persist(&dir, &empty, 0.0).unwrap();
        assert_eq!(load(&dir).unwrap(), empty);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = std::env::temp_dir().join(format!("dynpush-csvline-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(RESULTS_CSV);
        let header = CSV_COLUMNS.join(",");
        std::fs::write(&path, format!("{header}\na,0,0,4,0.1,0.5,empty,push,1,3,0,10,5,,,\nbad,row\n")).unwrap();
        match read_rows_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected line-3 parse error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn schema_version_mismatch_is_reported() {
        let config = demo_config();
        let result = execute(&config, 1).unwrap();
        let dir = std::env::temp_dir().join(format!("dynpush-schema-{}", std::process::id()));
        persist(&dir, &result, 0.0).unwrap();
        let sidecar_path = dir.join(RESULTS_JSON);
        let text = std::fs::read_to_string(&sidecar_path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        std::fs::write(&sidecar_path, text).unwrap();
        assert!(matches!(
            load(&dir),
            Err(Error::SchemaVersion { found: 2, expected: 1 })
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn source_only_tasks_record_target_round() {
        let mut config = demo_config();
        config.protocol = ProtocolChoice::SourceOnly;
        config.instruments.bootstrap_gamma = Some(2.0);
        config.grid.n = vec![64];
        config.replicas = 5;
        config.max_rounds = MaxRoundsRule::Fixed(4000);
        let result = execute(&config, 2).unwrap();
        for row in &result.rows {
            assert_eq!(row.protocol, "source-only");
            assert!(!row.timed_out, "source-only run timed out unexpectedly");
            assert_eq!(row.bootstrap_round, row.completion_round);
        }
    }
}
