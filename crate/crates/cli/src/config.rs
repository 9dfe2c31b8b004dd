//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key may appear at most
//! once; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use spdg::cases::{CaseKind, ErrorMetric};
use spdg::imex::ImexScheme;
use spdg::nssolver::PhysicsConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key '{key}'")]
    Duplicate { line: usize, key: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

pub const KEYS: &[&str] = &[
    "case",
    "degree",
    "cells",
    "grids",
    "nu",
    "cfl",
    "re_h",
    "scheme",
    "t_end",
    "out_dir",
    "snapshot_times",
    "seed",
    "study",
    "field",
    "delta_power",
    "metric",
    "threshold",
    "implicit_artificial_viscosity",
    "refresh_velocity_per_stage",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Trigonometric stream function and its curl.
    Operator,
    /// Stream-solve regularisation on the initial ABC vorticity.
    Delta,
    /// Time-dependent solver against a closed-form solution.
    Solver,
}

impl FromStr for Study {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "operator" => Ok(Study::Operator),
            "delta" => Ok(Study::Delta),
            "solver" => Ok(Study::Solver),
            _ => Err("expected operator, delta or solver".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestField {
    Trig,
    Random,
}

impl FromStr for TestField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trig" => Ok(TestField::Trig),
            "random" => Ok(TestField::Random),
            _ => Err("expected trig or random".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseKind,
    pub degree: usize,
    /// Cells per direction; `None` means the case's first recommended grid.
    pub cells: Option<[usize; 3]>,
    pub grids: Vec<usize>,
    pub physics: PhysicsConfig,
    pub scheme: ImexScheme,
    pub out_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub study: Study,
    pub field: TestField,
    pub metric: ErrorMetric,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseKind::Abc,
            degree: 1,
            cells: None,
            grids: Vec::new(),
            physics: PhysicsConfig::default(),
            scheme: ImexScheme::Lsdirk222,
            out_dir: PathBuf::from("out"),
            snapshot_times: Vec::new(),
            seed: 0,
            study: Study::Solver,
            field: TestField::Random,
            metric: ErrorMetric::CellMean,
            threshold: 1e-11,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        msg: format!("cannot parse '{raw}': {e}"),
    })
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

fn flag(key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            msg: format!("expected true or false, got '{raw}'"),
        }),
    }
}

/// Splits the text into a key map, checking syntax, duplicates and names.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                line: i + 1,
                key: k.to_string(),
            });
        }
    }
    Ok(map)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = parse_pairs(text)?;
        let mut c = RunConfig::default();
        let mut nu_set = false;
        let mut t_end_set = false;
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "case" => {
                    c.case = v.parse().map_err(|e: spdg::SpdgError| ConfigError::Value {
                        key: k.clone(),
                        msg: e.to_string(),
                    })?
                }
                "degree" => c.degree = value(k, v)?,
                "cells" => {
                    let n: Vec<usize> = list(k, v)?;
                    c.cells = Some(match n.as_slice() {
                        [a] => [*a; 3],
                        [a, b, d] => [*a, *b, *d],
                        _ => {
                            return Err(ConfigError::Value {
                                key: k.clone(),
                                msg: "expected one or three integers".into(),
                            })
                        }
                    });
                }
                "grids" => c.grids = list(k, v)?,
                "nu" => {
                    c.physics.nu = value(k, v)?;
                    nu_set = true;
                }
                "cfl" => c.physics.cfl = value(k, v)?,
                "re_h" => c.physics.re_h = value(k, v)?,
                "scheme" => {
                    c.scheme = v.parse().map_err(|e: spdg::SpdgError| ConfigError::Value {
                        key: k.clone(),
                        msg: e.to_string(),
                    })?
                }
                "t_end" => {
                    c.physics.t_end = value(k, v)?;
                    t_end_set = true;
                }
                "out_dir" => c.out_dir = PathBuf::from(v),
                "snapshot_times" => c.snapshot_times = list(k, v)?,
                "seed" => c.seed = value(k, v)?,
                "study" => c.study = value(k, v)?,
                "field" => c.field = value(k, v)?,
                "delta_power" => c.physics.delta_power = Some(value(k, v)?),
                "metric" => {
                    c.metric = v.parse().map_err(|e: spdg::SpdgError| ConfigError::Value {
                        key: k.clone(),
                        msg: e.to_string(),
                    })?
                }
                "threshold" => c.threshold = value(k, v)?,
                "implicit_artificial_viscosity" => c.physics.implicit_artificial_viscosity = flag(k, v)?,
                "refresh_velocity_per_stage" => c.physics.refresh_velocity_per_stage = flag(k, v)?,
                _ => unreachable!("keys are checked by parse_pairs"),
            }
        }
        let spec = spdg::cases::CaseSpec::new(c.case);
        if !nu_set {
            c.physics.nu = spec.default_nu;
        }
        if !t_end_set {
            c.physics.t_end = spec.default_t_end;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.degree > spdg::opkernels::MAX_DEGREE {
            return Err(ConfigError::Invalid(format!(
                "degree must be at most {}",
                spdg::opkernels::MAX_DEGREE
            )));
        }
        if let Some(n) = self.cells {
            if n.iter().any(|&x| x == 0 || x > u16::MAX as usize) {
                return Err(ConfigError::Invalid("cells must lie in 1..=65535".into()));
            }
        }
        if self.grids.iter().any(|&g| g == 0) {
            return Err(ConfigError::Invalid("grids must be positive".into()));
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(ConfigError::Invalid("snapshot_times must be finite and non-negative".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(ConfigError::Invalid("threshold must be positive".into()));
        }
        self.physics
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn counts(&self) -> [usize; 3] {
        self.cells
            .unwrap_or_else(|| spdg::cases::CaseSpec::new(self.case).recommended_counts[0])
    }
}
