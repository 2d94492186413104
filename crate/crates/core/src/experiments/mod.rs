//! Configured, seeded experiments with pass/fail verdicts.
//!
//! A run is fully determined by its [`ExperimentConfig`]: the experiment name,
//! the seed and the parameter map. Parameters are parsed into typed structs
//! whose defaults are written back into the record, so a record replays
//! without knowing the defaults of the version that produced it.

mod checks;
mod runs;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, ResultExt};
use crate::rng::Seed;

pub use checks::{
    borrow_strength_experiment, contraction_experiment, hellinger_1d, identity_bracket, small_ball_bound, small_ball_check,
    thickness_check, BorrowRow, ContractionRow, IdentityBracket, SmallBallOutcome, ThicknessOutcome,
};
pub use runs::{
    BorrowParams, ContractionParams, DemixParams, IdentityParams, KlParams, SmallBallParams, TailCase, TailParams,
    ThicknessParams, TubeCase, TubeParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Identity,
    Tail,
    KlBound,
    SmallBall,
    Thickness,
    Tube,
    DemixRate,
    BorrowStrength,
    Contraction,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Identity,
        ExperimentKind::Tail,
        ExperimentKind::KlBound,
        ExperimentKind::SmallBall,
        ExperimentKind::Thickness,
        ExperimentKind::Tube,
        ExperimentKind::DemixRate,
        ExperimentKind::BorrowStrength,
        ExperimentKind::Contraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Identity => "identity",
            ExperimentKind::Tail => "tail",
            ExperimentKind::KlBound => "kl-bound",
            ExperimentKind::SmallBall => "small-ball",
            ExperimentKind::Thickness => "thickness",
            ExperimentKind::Tube => "tube",
            ExperimentKind::DemixRate => "demix-rate",
            ExperimentKind::BorrowStrength => "borrow-strength",
            ExperimentKind::Contraction => "contraction",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, params: Value) -> Self {
        ExperimentConfig {
            experiment: kind.name().to_string(),
            seed: Some(seed),
            params,
            output_path: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::from).context(format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(Error::from)
            .context(format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub status: Status,
    /// Distance from the decision threshold; positive on the passing side.
    pub margin: f64,
    pub detail: String,
}

impl Verdict {
    pub(crate) fn decide(criterion: &str, margin: f64, detail: String) -> Verdict {
        Verdict {
            criterion: criterion.to_string(),
            status: if margin >= 0.0 { Status::Pass } else { Status::Fail },
            margin,
            detail,
        }
    }

    pub(crate) fn with_status(criterion: &str, status: Status, margin: f64, detail: String) -> Verdict {
        Verdict {
            criterion: criterion.to_string(),
            status,
            margin,
            detail,
        }
    }
}

/// Rows with a fixed column schema, one schema per experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub(crate) fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

pub(crate) struct Outcome {
    pub table: Table,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub seed: u64,
    /// Parameters after defaults were applied.
    pub params: Value,
    pub config_hash: String,
    pub table: Table,
    pub verdicts: Vec<Verdict>,
    /// Digest of everything above.
    pub record_hash: String,
}

impl ExperimentRecord {
    pub fn has_failure(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == Status::Fail)
    }

    pub fn verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }
}

fn digest(value: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn parse_params<P: serde::de::DeserializeOwned>(params: &Value) -> Result<P> {
    let v = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| Error::Parse(format!("params: {e}")))
}

fn run_typed<P>(params: &Value, seed: Seed, body: impl FnOnce(&P, Seed) -> Result<Outcome>) -> Result<(Value, Outcome)>
where
    P: serde::de::DeserializeOwned + Serialize,
{
    let p: P = parse_params(params)?;
    let resolved = serde_json::to_value(&p)?;
    Ok((resolved, body(&p, seed)?))
}

/// Runs one experiment. The result depends only on the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    let kind: ExperimentKind = cfg.experiment.parse()?;
    let seed = cfg.seed.ok_or_else(|| Error::MissingParameter("seed".into()))?;
    let s = Seed(seed);
    let p = &cfg.params;
    let (params, outcome) = match kind {
        ExperimentKind::Identity => run_typed(p, s, runs::identity),
        ExperimentKind::Tail => run_typed(p, s, runs::tail),
        ExperimentKind::KlBound => run_typed(p, s, runs::kl_bound),
        ExperimentKind::SmallBall => run_typed(p, s, runs::small_ball),
        ExperimentKind::Thickness => run_typed(p, s, runs::thickness),
        ExperimentKind::Tube => run_typed(p, s, runs::tube),
        ExperimentKind::DemixRate => run_typed(p, s, runs::demix_rate),
        ExperimentKind::BorrowStrength => run_typed(p, s, runs::borrow_strength),
        ExperimentKind::Contraction => run_typed(p, s, runs::contraction),
    }
    .context(format!("experiment {kind}"))?;
    let config_hash = digest(&serde_json::json!({
        "experiment": kind.name(),
        "seed": seed,
        "params": params,
    }))?;
    let mut record = ExperimentRecord {
        experiment: kind.name().to_string(),
        seed,
        params,
        config_hash,
        table: outcome.table,
        verdicts: outcome.verdicts,
        record_hash: String::new(),
    };
    record.record_hash = digest(&record)?;
    Ok(record)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Writes `<name>.csv` (the table) and `<name>.json` (the record) into `dir`.
pub fn write_outputs(record: &ExperimentRecord, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(Error::from).context(format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{}.csv", record.experiment));
    let json_path = dir.join(format!("{}.json", record.experiment));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(&record.table.columns)?;
    for row in &record.table.rows {
        w.write_record(row.iter().map(csv_cell))?;
    }
    w.flush()?;
    std::fs::write(&json_path, serde_json::to_string_pretty(record)?)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests;
