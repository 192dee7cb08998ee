//! Config-driven experiments over the `sconclab` library. Each run writes a
//! `report.json` and data CSVs into its output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod registry;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use config::{CaseConfig, ConfigError, RunPlan};
use experiments::Check;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Nothing was checked.
    Done,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Done => 0,
            Status::Fail => 2,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub seed: u64,
    pub status: Status,
    pub parameters: Value,
    pub checks: Vec<Check>,
    pub results: Value,
    pub artifacts: Vec<String>,
}

/// Everything in a report is a function of the config except `timestamp`.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    pub status: Status,
    pub cases: Vec<CaseReport>,
    pub timestamp: u64,
}

fn status_of<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Status {
    let mut any = false;
    for c in checks {
        if !c.pass {
            return Status::Fail;
        }
        any = true;
    }
    if any {
        Status::Pass
    } else {
        Status::Done
    }
}

fn parameters(c: &CaseConfig) -> Value {
    let mut c = c.clone();
    c.output = None;
    c.case = None;
    serde_json::to_value(&c).expect("config serializes")
}

/// Runs every case of `plan` and writes the report and artifacts.
pub fn execute(plan: &RunPlan) -> Result<RunReport, CliError> {
    let mut cases = Vec::with_capacity(plan.cases.len());
    let mut files = Vec::new();
    for case in &plan.cases {
        let out = experiments::run_case(plan, case)?;
        let mut names = Vec::with_capacity(out.artifacts.len());
        for a in out.artifacts {
            let file = if plan.cases.len() > 1 {
                format!("{}-{}", case.name, a.file)
            } else {
                a.file
            };
            names.push(file.clone());
            files.push((file, a.bytes));
        }
        cases.push(CaseReport {
            name: case.name.clone(),
            seed: case.seed,
            status: status_of(&out.checks),
            parameters: parameters(&case.config),
            checks: out.checks,
            results: out.results,
            artifacts: names,
        });
    }
    let status = status_of(cases.iter().flat_map(|c| &c.checks));
    let report = RunReport {
        experiment: plan.experiment.clone(),
        seed: plan.seed,
        status,
        cases,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_outputs(&plan.output, &report, &files)?;
    Ok(report)
}

fn write_outputs(
    dir: &Path,
    report: &RunReport,
    files: &[(String, Vec<u8>)],
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
    }
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(dir.join("report.json"), text).map_err(io)?;
    Ok(())
}

/// `report.json` without the `timestamp` field, for reproducibility checks.
pub fn comparable_report(text: &str) -> Result<Value, serde_json::Error> {
    let mut v: Value = serde_json::from_str(text)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("timestamp");
    }
    Ok(v)
}
