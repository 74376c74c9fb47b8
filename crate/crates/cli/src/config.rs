//! Run configuration.
//!
//! The file is TOML: `section.key = value` lines or `[section]` tables, lists
//! in brackets. Three sections are recognized and unknown keys are errors.
//!
//! ```toml
//! [measure]
//! type = "discrete"                 # or "binary_density"
//! atoms = [[1.0, [0.7, 0.3]]]       # [rate, [s1, s2, ...]] per atom
//!
//! [run]
//! eta = 1e-3
//! replicas = 100
//! seed = 7
//!
//! [output]
//! format = "csv"
//! ```

use std::fmt;
use std::path::PathBuf;

use fragline::dislocation::{BinaryDensity, DiscreteDislocation, Dislocation, DislocationError};
use fragline::fragsim::DEFAULT_BUDGET;
use fragline::testfn::{TestFunction, TestFunctionError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureType {
    Discrete,
    BinaryDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityName {
    /// Uniform split point, `intensity` per unit length.
    Uniform,
    /// `intensity * (1 - a)^-gamma`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(rename = "type")]
    pub kind: MeasureType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<(f64, Vec<f64>)>,
    #[serde(default = "default_density")]
    pub density: DensityName,
    #[serde(default = "one")]
    pub intensity: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Fraction of the smaller piece that is kept; below 1 the density loses mass.
    #[serde(default = "one")]
    pub retain: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_lower: Option<f64>,
}

fn default_density() -> DensityName {
    DensityName::Uniform
}
fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta_schedule: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Test functions, e.g. `"one"`, `"id"`, `"ind[0.5,1]"`, `"bin:3/16"`.
    #[serde(default = "default_f")]
    pub f: Vec<String>,
    /// Exponent arguments for `phi`; tilt for `overshoot` (first entry).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    /// Time horizon for `largest`.
    #[serde(default = "default_t")]
    pub t: f64,
    /// Levels for `overshoot`.
    #[serde(default = "default_x")]
    pub x: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
}

fn default_eta() -> f64 {
    1e-2
}
fn default_replicas() -> usize {
    100
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_f() -> Vec<String> {
    vec!["one".to_string()]
}
fn default_t() -> f64 {
    1.0
}
fn default_x() -> Vec<f64> {
    vec![10.0]
}
fn default_lambda() -> Vec<f64> {
    vec![1.0]
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            eta: default_eta(),
            eta_schedule: Vec::new(),
            replicas: default_replicas(),
            seed: 0,
            budget: default_budget(),
            f: default_f(),
            p: Vec::new(),
            t: default_t(),
            x: default_x(),
            lambda: default_lambda(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Where checks write their summary; standard error when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map_or((1, 1), |span| line_column(text, span.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn dislocation_error(key: &str, e: DislocationError) -> ConfigError {
    invalid(key, e)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dislocation()?;
        self.test_functions()?;
        let r = &self.run;
        if !(r.eta > 0.0 && r.eta.is_finite()) {
            return Err(invalid("run.eta", "must be positive"));
        }
        if !r.eta_schedule.is_empty() {
            if r.eta_schedule.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return Err(invalid("run.eta_schedule", "entries must lie in (0, 1]"));
            }
            if r.eta_schedule.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("run.eta_schedule", "must be strictly decreasing"));
            }
        }
        if r.replicas == 0 {
            return Err(invalid("run.replicas", "must be at least 1"));
        }
        if r.budget == 0 {
            return Err(invalid("run.budget", "must be at least 1"));
        }
        if !(r.t >= 0.0 && r.t.is_finite()) {
            return Err(invalid("run.t", "must be nonnegative"));
        }
        if r.x.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("run.x", "levels must be nonnegative"));
        }
        if !r.alpha.is_finite() {
            return Err(invalid("run.alpha", "must be finite"));
        }
        Ok(())
    }

    /// The measure described by the `measure` section.
    pub fn dislocation(&self) -> Result<Dislocation, ConfigError> {
        let m = &self.measure;
        let nu = match m.kind {
            MeasureType::Discrete => {
                if m.atoms.is_empty() {
                    return Err(invalid("measure.atoms", "a discrete measure needs atoms"));
                }
                let mut d = DiscreteDislocation::from_raw(&m.atoms)
                    .map_err(|e| dislocation_error("measure.atoms", e))?;
                if let Some(p) = m.p_lower {
                    d = d.with_lower_index(p);
                }
                Dislocation::Discrete(d)
            }
            MeasureType::BinaryDensity => {
                let gamma = match m.density {
                    DensityName::Uniform => 0.0,
                    DensityName::Power => m.gamma,
                };
                let mut family = BinaryDensity::new(m.intensity, gamma, m.retain)
                    .map_err(|e| dislocation_error("measure.density", e))?;
                if let Some(p) = m.p_lower {
                    family = family.with_lower_index(p);
                }
                let t = family
                    .truncate(m.epsilon)
                    .map_err(|e| dislocation_error("measure.epsilon", e))?;
                Dislocation::Truncated(t)
            }
        };
        Ok(nu)
    }

    pub fn test_functions(&self) -> Result<Vec<(String, TestFunction)>, ConfigError> {
        self.run
            .f
            .iter()
            .map(|s| {
                s.parse()
                    .map(|f| (s.clone(), f))
                    .map_err(|e: TestFunctionError| invalid("run.f", e))
            })
            .collect()
    }

    /// `run.eta_schedule`, or `[run.eta]` when no schedule is given.
    pub fn etas(&self) -> Vec<f64> {
        if self.run.eta_schedule.is_empty() {
            vec![self.run.eta]
        } else {
            self.run.eta_schedule.clone()
        }
    }

    /// The configuration with every default filled in, as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
