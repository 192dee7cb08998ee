use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}field `{field}`: {message}", location(.origin, .line))]
    Field {
        origin: String,
        line: Option<usize>,
        field: String,
        message: String,
    },
}

fn location(origin: &str, line: &Option<usize>) -> String {
    match line {
        Some(l) => format!("{origin}:{l}: "),
        None if origin.is_empty() => String::new(),
        None => format!("{origin}: "),
    }
}

/// Axis-aligned region, either `"a,b x c,d"` or `[[a, b], [c, d]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Text(String),
    Bounds(Vec<[f64; 2]>),
}

impl BoxSpec {
    pub fn bounds(&self) -> Result<Vec<[f64; 2]>, String> {
        match self {
            BoxSpec::Bounds(b) => Ok(b.clone()),
            BoxSpec::Text(s) => s
                .split(['x', 'X', '×'])
                .map(|axis| {
                    let v = parse_list(axis)?;
                    match v[..] {
                        [lo, hi] => Ok([lo, hi]),
                        _ => Err(format!("axis `{}` needs exactly two numbers", axis.trim())),
                    }
                })
                .collect(),
        }
    }
}

/// A point, either `"x,y"` or `[x, y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Text(String),
    Coords(Vec<f64>),
}

impl PointSpec {
    pub fn coords(&self) -> Result<Vec<f64>, String> {
        match self {
            PointSpec::Coords(c) => Ok(c.clone()),
            PointSpec::Text(s) => parse_list(s),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", v.trim()))
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub name: Option<String>,
    pub n_max: Option<usize>,
    pub directions: Option<usize>,
    pub a: Option<PointSpec>,
    pub b: Option<PointSpec>,
    pub heights: Option<[f64; 2]>,
    pub curvature: Option<f64>,
    pub hessian_bound: Option<f64>,
    pub pieces: Option<Vec<PieceConfig>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub center: Vec<f64>,
    #[serde(default)]
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: Option<String>,
    pub potential: Option<String>,
    pub amplitude: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    pub time_modulation: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: Option<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub half_width: Option<f64>,
    pub period: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarConfig {
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub dr: f64,
    pub angles: usize,
}

/// Bounds on the component count of `Σ^{≤k}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCheck {
    pub k: usize,
    pub min: Option<usize>,
    pub max: Option<usize>,
}

/// One experiment case. A config file is a base case plus optional
/// `[[case]]` tables that override it key by key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub experiment: Option<String>,
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub dim: Option<usize>,

    pub function: Option<FunctionConfig>,
    pub system: Option<SystemConfig>,
    pub domain: Option<DomainConfig>,

    #[serde(rename = "box")]
    pub region: Option<BoxSpec>,
    pub h: Option<f64>,
    pub points: Option<usize>,
    pub t: Option<f64>,
    pub t1: Option<f64>,
    pub tol: Option<f64>,

    pub scan_spacing: Option<f64>,
    pub scan_radius: Option<f64>,
    pub fiber_spacing: Option<f64>,
    pub fiber_points: Option<usize>,
    pub cap: Option<f64>,

    pub inclusion_only: Option<bool>,
    pub polar: Option<PolarConfig>,

    pub components: Option<Vec<ComponentCheck>>,
    pub classify_tol: Option<f64>,
    pub write_csv: Option<bool>,

    pub a: Option<PointSpec>,
    pub b: Option<PointSpec>,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub seeds: Option<usize>,
    pub recheck_factor: Option<usize>,
    pub recheck_seeds: Option<usize>,

    pub operator: Option<String>,
    pub check: Option<String>,
    pub t_max: Option<f64>,
    pub lipschitz: Option<f64>,
    pub knots: Option<usize>,
    pub max_offset: Option<f64>,

    pub x0: Option<PointSpec>,
    pub p0: Option<PointSpec>,
    pub steps: Option<usize>,
    pub energy_tol: Option<f64>,
    pub jacobian_tol: Option<f64>,
    pub exact_tol: Option<f64>,
    pub fd_step: Option<f64>,

    pub k: Option<usize>,
    pub scales: Option<[i32; 2]>,
    pub expect: Option<f64>,
    pub bound_slack: Option<f64>,
    pub label_lines: Option<Vec<f64>>,
    pub label_axis: Option<usize>,
    pub label_value: Option<u8>,

    pub t_step: Option<f64>,
    pub pass_t: Option<f64>,
    pub fail_t: Option<f64>,
    pub bracket: Option<[f64; 2]>,
    pub bisection_tol: Option<f64>,

    pub case: Option<Vec<CaseConfig>>,
}

/// A case with every override applied.
#[derive(Clone, Debug)]
pub struct ResolvedCase {
    pub index: usize,
    pub name: String,
    pub experiment: String,
    pub seed: u64,
    pub config: CaseConfig,
}

#[derive(Clone, Debug)]
pub struct RunPlan {
    pub experiment: String,
    pub seed: u64,
    pub output: PathBuf,
    pub cases: Vec<ResolvedCase>,
    /// Source text, for locating fields in diagnostics.
    pub source: Option<(String, String)>,
}

impl RunPlan {
    /// A field error, with the line of `needle` in the config when found.
    pub fn field_error(
        &self,
        field: impl Into<String>,
        needle: &str,
        message: impl fmt::Display,
    ) -> ConfigError {
        let (origin, line) = match &self.source {
            Some((origin, text)) => (origin.clone(), find_line(text, needle)),
            None => (String::new(), None),
        };
        ConfigError::Field {
            origin,
            line,
            field: field.into(),
            message: message.to_string(),
        }
    }
}

fn find_line(text: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

fn syntax_error(origin: &str, text: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Syntax {
        origin: origin.into(),
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

fn to_table(c: &CaseConfig) -> toml::Table {
    toml::Table::try_from(c).expect("config tables serialize")
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn from_table(t: toml::Table, origin: &str) -> Result<CaseConfig, ConfigError> {
    serde_path_to_error::deserialize(toml::Value::Table(t)).map_err(|e| ConfigError::Field {
        origin: origin.into(),
        line: None,
        field: e.path().to_string(),
        message: e.into_inner().message().trim().to_string(),
    })
}

/// Parses `key=value` overrides in TOML syntax, e.g. `function.n_max=8`.
pub fn parse_set(assignments: &[String]) -> Result<toml::Table, ConfigError> {
    let mut out = toml::Table::new();
    for a in assignments {
        let t: toml::Table = toml::from_str(a).map_err(|e| ConfigError::Field {
            origin: "--set".into(),
            line: None,
            field: a.split('=').next().unwrap_or("").trim().into(),
            message: e.message().trim().to_string(),
        })?;
        merge(&mut out, &t);
    }
    Ok(out)
}

pub const EXPERIMENTS: [&str; 8] = [
    "verify-arnaud",
    "strata",
    "path",
    "evolve",
    "flow",
    "dim",
    "critical-time",
    "inf-repr",
];

/// Builds the run plan for `experiment` from an optional config file and a
/// table of flag overrides, which win over every case.
pub fn plan(
    experiment: &str,
    config: Option<&Path>,
    overrides: &CaseConfig,
    set: &toml::Table,
) -> Result<RunPlan, ConfigError> {
    if !EXPERIMENTS.contains(&experiment) {
        return Err(ConfigError::Field {
            origin: String::new(),
            line: None,
            field: "experiment".into(),
            message: format!(
                "unknown experiment `{experiment}`; known: {}",
                EXPERIMENTS.join(", ")
            ),
        });
    }
    let (mut file, source) = match config {
        Some(path) => {
            let origin = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: origin.clone(),
                source,
            })?;
            let parsed: CaseConfig =
                toml::from_str(&text).map_err(|e| syntax_error(&origin, &text, &e))?;
            (parsed, Some((origin, text)))
        }
        None => (CaseConfig::default(), None),
    };
    let origin = source.as_ref().map(|s| s.0.clone()).unwrap_or_default();
    let mut probe = RunPlan {
        experiment: experiment.into(),
        seed: 0,
        output: PathBuf::new(),
        cases: Vec::new(),
        source,
    };
    if let Some(e) = &file.experiment {
        if e != experiment {
            return Err(probe.field_error(
                "experiment",
                "experiment",
                format!("config is for `{e}`, not `{experiment}`"),
            ));
        }
    }
    let cases = file.case.take().unwrap_or_default();
    let mut over = to_table(overrides);
    merge(&mut over, set);
    let base = to_table(&file);
    let raw_cases = if cases.is_empty() {
        vec![CaseConfig::default()]
    } else {
        cases
    };
    let mut resolved = Vec::with_capacity(raw_cases.len());
    for (i, c) in raw_cases.iter().enumerate() {
        if c.case.is_some() {
            return Err(probe.field_error(
                format!("case[{i}].case"),
                "[[case.case]]",
                "cases cannot nest",
            ));
        }
        if c.experiment.as_deref().is_some_and(|e| e != experiment) {
            return Err(probe.field_error(
                format!("case[{i}].experiment"),
                "experiment",
                "a case cannot change the experiment",
            ));
        }
        let mut t = base.clone();
        merge(&mut t, &to_table(c));
        merge(&mut t, &over);
        let cfg = from_table(t, &origin)?;
        resolved.push(ResolvedCase {
            index: i,
            name: cfg.name.clone().unwrap_or_else(|| format!("case{i}")),
            experiment: experiment.into(),
            seed: cfg.seed.unwrap_or(0),
            config: cfg,
        });
    }
    let mut names: Vec<&str> = resolved.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(probe.field_error(
            "name",
            &format!("\"{}\"", w[0]),
            format!("duplicate case name `{}`", w[0]),
        ));
    }
    let base_cfg = &resolved[0].config;
    probe.seed = overrides.seed.or(file.seed).unwrap_or(0);
    probe.output = PathBuf::from(
        overrides
            .output
            .clone()
            .or(file.output.clone())
            .or(base_cfg.output.clone())
            .unwrap_or_else(|| format!("out/{experiment}")),
    );
    probe.cases = resolved;
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_text_parses() {
        let b = BoxSpec::Text("-2,1x-1,1".into()).bounds().unwrap();
        assert_eq!(b, vec![[-2.0, 1.0], [-1.0, 1.0]]);
        assert!(BoxSpec::Text("-2,1,3".into()).bounds().is_err());
        assert!(BoxSpec::Text("a,b".into()).bounds().is_err());
    }

    #[test]
    fn cases_override_base_and_flags_override_cases() {
        let dir = std::env::temp_dir().join(format!("sconclab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(
            &path,
            "experiment = \"strata\"\nh = 0.1\n[function]\nname = \"phi2\"\nn_max = 4\n\
             [[case]]\nname = \"a\"\n[[case]]\nname = \"b\"\nh = 0.2\n[case.function]\nn_max = 6\n",
        )
        .unwrap();
        let flags = CaseConfig {
            t: Some(0.5),
            ..CaseConfig::default()
        };
        let p = plan("strata", Some(&path), &flags, &toml::Table::new()).unwrap();
        assert_eq!(p.cases.len(), 2);
        assert_eq!(p.cases[0].config.h, Some(0.1));
        assert_eq!(p.cases[1].config.h, Some(0.2));
        let f = p.cases[1].config.function.as_ref().unwrap();
        assert_eq!((f.name.as_deref(), f.n_max), (Some("phi2"), Some(6)));
        assert!(p.cases.iter().all(|c| c.config.t == Some(0.5)));

        let set = parse_set(&["h = 0.3".into()]).unwrap();
        let p = plan("strata", Some(&path), &flags, &set).unwrap();
        assert!(p.cases.iter().all(|c| c.config.h == Some(0.3)));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_field_reports_its_line() {
        let dir = std::env::temp_dir().join(format!("sconclab-config-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "h = 0.1\n\n[function]\nname = \"phi2\"\nnmax = 3\n").unwrap();
        let err = plan(
            "strata",
            Some(&path),
            &CaseConfig::default(),
            &toml::Table::new(),
        )
        .unwrap_err();
        match err {
            ConfigError::Syntax {
                line, ref message, ..
            } => {
                assert_eq!(line, 5, "{err}");
                assert!(message.contains("nmax"), "{message}");
            }
            other => panic!("{other}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
