mod arnaud;
mod evolve;
mod flow;
mod regularity;
mod topology;

use serde::Serialize;
use serde_json::Value;

use sconclab::grid::Grid;
use sconclab::scalar::format_sig17;
use sconclab::semiconcave::MarginalFunction;
use sconclab::tonelli::{DomainSpec, TonelliSystem};

use crate::config::{CaseConfig, ResolvedCase, RunPlan};
use crate::registry;
use crate::CliError;

/// One tolerance check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!("<= {}", limit_text(limit)),
            pass: value <= limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!(">= {}", limit_text(limit)),
            pass: value >= limit,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!("in [{}, {}]", limit_text(lo), limit_text(hi)),
            pass: lo <= value && value <= hi,
        }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            expected: "true".into(),
            pass: ok,
        }
    }
}

fn limit_text(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub struct Artifact {
    pub file: String,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

pub fn run_case(plan: &RunPlan, case: &ResolvedCase) -> Result<Outcome, CliError> {
    let ctx = Ctx { plan, case };
    match case.experiment.as_str() {
        "verify-arnaud" => arnaud::run(&ctx),
        "strata" => topology::strata(&ctx),
        "path" => topology::path(&ctx),
        "dim" => topology::dim(&ctx),
        "evolve" => evolve::run(&ctx),
        "flow" => flow::run(&ctx),
        "critical-time" => regularity::critical_time(&ctx),
        "inf-repr" => regularity::inf_repr(&ctx),
        other => unreachable!("unvalidated experiment {other}"),
    }
}

pub(crate) struct Ctx<'a> {
    plan: &'a RunPlan,
    case: &'a ResolvedCase,
}

impl Ctx<'_> {
    fn c(&self) -> &CaseConfig {
        &self.case.config
    }

    fn field(&self, field: &str, needle: &str, message: impl std::fmt::Display) -> CliError {
        let path = if self.plan.cases.len() > 1 {
            format!("case[{}].{field}", self.case.index)
        } else {
            field.to_string()
        };
        CliError::Config(self.plan.field_error(path, needle, message))
    }

    fn require<T: Clone>(&self, v: &Option<T>, field: &str) -> Result<T, CliError> {
        v.clone()
            .ok_or_else(|| self.field(field, "", "is required by this experiment"))
    }

    fn positive(&self, v: f64, field: &str) -> Result<f64, CliError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.field(field, field, format!("must be positive, got {v}")))
        }
    }

    fn dim(&self, fallback: usize) -> Result<usize, CliError> {
        let d = registry::dimension(self.c(), fallback).map_err(|m| self.field("box", "box", m))?;
        if d == 0 {
            return Err(self.field("dim", "dim", "must be at least 1"));
        }
        Ok(d)
    }

    /// The configured box, or `default` on every axis.
    fn region(&self, d: usize, default: [f64; 2]) -> Result<Vec<[f64; 2]>, CliError> {
        let b = match &self.c().region {
            Some(spec) => spec.bounds().map_err(|m| self.field("box", "box", m))?,
            None => vec![default; d],
        };
        if b.len() != d {
            return Err(self.field("box", "box", format!("has {} axes, expected {d}", b.len())));
        }
        if let Some(ax) = b.iter().find(|ax| !(ax[0] < ax[1])) {
            return Err(self.field(
                "box",
                "box",
                format!("axis [{}, {}] is empty", ax[0], ax[1]),
            ));
        }
        Ok(b)
    }

    /// Domain from the config; by default a symmetric box reaching past the region.
    fn domain(&self, d: usize, region: &[[f64; 2]]) -> Result<DomainSpec<f64>, CliError> {
        let mut c = self.c().clone();
        if c.domain
            .as_ref()
            .is_none_or(|dc| dc.half_width.is_none() && dc.lower.is_none())
        {
            let reach = region.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let dc = c.domain.get_or_insert_with(Default::default);
            dc.half_width = Some(reach.max(2.0) + 1.0);
        }
        registry::domain(&c, d).map_err(|m| self.field("domain", "[domain]", m))
    }

    fn function(&self, domain: &DomainSpec<f64>) -> Result<MarginalFunction<f64>, CliError> {
        let needle = self
            .c()
            .function
            .as_ref()
            .and_then(|f| f.name.clone())
            .map(|n| format!("\"{n}\""))
            .unwrap_or_else(|| "function".into());
        registry::function(self.c().function.as_ref(), domain.clone())
            .map_err(|m| self.field("function", &needle, m))
    }

    fn system(&self, domain: &DomainSpec<f64>) -> Result<TonelliSystem<f64>, CliError> {
        let needle = self
            .c()
            .system
            .as_ref()
            .and_then(|s| s.name.clone())
            .map(|n| format!("\"{n}\""))
            .unwrap_or_else(|| "system".into());
        registry::system(self.c().system.as_ref(), domain.clone())
            .map_err(|m| self.field("system", &needle, m))
    }

    /// `points` nodes per axis when given, else spacing `h`.
    fn grid(&self, region: &[[f64; 2]], default_h: f64) -> Result<Grid<f64>, CliError> {
        let g = match self.c().points {
            Some(n) if region.len() == 1 => {
                if n < 2 {
                    return Err(self.field("points", "points", "needs at least 2 nodes"));
                }
                Grid::linspace(region[0][0], region[0][1], n)
            }
            Some(_) => {
                return Err(self.field("points", "points", "only applies to one-dimensional grids"))
            }
            None => {
                let h = self.positive(self.c().h.unwrap_or(default_h), "h")?;
                let lo: Vec<f64> = region.iter().map(|a| a[0]).collect();
                let hi: Vec<f64> = region.iter().map(|a| a[1]).collect();
                Grid::covering(&lo, &hi, h)
            }
        };
        g.map_err(|e| self.field("box", "box", e))
    }

    fn seed(&self) -> u64 {
        self.case.seed
    }
}

pub(crate) fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

pub(crate) fn json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// CSV text with a header; floats at 17 significant digits.
pub(crate) fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.into_iter().map(format_sig17).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub(crate) fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}{i}")).collect()
}
