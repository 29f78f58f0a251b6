//! TOML configuration with `TWOSTAGE_` environment overrides.
//!
//! Precedence, lowest first: file, environment, command-line flags. An
//! environment key maps onto the config tree by lower-casing it and splitting
//! on `__`, so `TWOSTAGE_BOOTSTRAP__REPLICATES=500` sets `bootstrap.replicates`
//! and `TWOSTAGE_MODEL__1__DF=10` sets `df` on the second `[[model]]`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Value;
use twostage::basis::{BasisTemplate, SplineKind};
use twostage::boot::{IntervalKind, MIN_REPLICATES};
use twostage::diagnose::Thresholds;
use twostage::simgen::{Method, Scenario1D, Scenario2D};

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "TWOSTAGE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub monitors: PathBuf,
    pub subjects: PathBuf,
    #[serde(default)]
    pub cluster_column: Option<String>,
    #[serde(default)]
    pub health_covariates: Vec<String>,
    #[serde(default = "yes")]
    pub health_intercept: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(rename = "model")]
    pub models: Vec<ModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub enabled: bool,
    pub replicates: usize,
    pub bias_correction: bool,
    pub interval: IntervalKind,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            replicates: 200,
            bias_correction: true,
            interval: IntervalKind::Wald,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub ks_threshold: f64,
    pub span_r2_threshold: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            ks_threshold: t.ks,
            span_r2_threshold: t.span_r2,
        }
    }
}

impl DiagnosticsConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            ks: self.ks_threshold,
            span_r2: self.span_r2_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default = "no_spline")]
    pub spline: SplineKind,
    #[serde(default)]
    pub df: usize,
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
}

impl ModelConfig {
    pub fn template(&self) -> BasisTemplate {
        BasisTemplate {
            covariate_names: self.covariates.clone(),
            spline_kind: self.spline,
            spline_df: self.df,
            intercept: self.intercept,
            domain: self.domain.map(|[a, b]| (a, b)),
        }
    }
}

fn yes() -> bool {
    true
}

fn no_spline() -> SplineKind {
    SplineKind::None
}

fn default_output() -> PathBuf {
    PathBuf::from("twostage-out")
}

impl AnalysisConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.models.is_empty() {
            return Err(CliError::ConfigInvalid("at least one [[model]] is required".into()));
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            if !seen.insert(m.name.as_str()) {
                return Err(CliError::ConfigInvalid(format!("duplicate model name '{}'", m.name)));
            }
            if m.name.is_empty() || m.name.contains(['/', '\\']) {
                return Err(CliError::ConfigInvalid(format!("model name '{}' is not a valid file stem", m.name)));
            }
            if m.spline == SplineKind::None && m.df != 0 {
                return Err(CliError::ConfigInvalid(format!("model '{}': df must be 0 without a spline", m.name)));
            }
        }
        if self.bootstrap.enabled && self.bootstrap.replicates < MIN_REPLICATES {
            return Err(CliError::ConfigInvalid(format!(
                "bootstrap.replicates must be at least {MIN_REPLICATES} when the bootstrap is enabled (got {})",
                self.bootstrap.replicates
            )));
        }
        let d = &self.diagnostics;
        if !(0.0..=1.0).contains(&d.ks_threshold) || !(d.span_r2_threshold <= 1.0) {
            return Err(CliError::ConfigInvalid("diagnostic thresholds out of range".into()));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.monitors, &mut self.subjects, &mut self.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sim_output")]
    pub output: PathBuf,
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default = "thousand")]
    pub replicates: usize,
    #[serde(default = "hundred")]
    pub bootstrap_reps: usize,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub oracle_exposure: bool,
    #[serde(default)]
    pub cv_r2: bool,
    /// Exposure-model df sweep; defaults to the scenario's own df.
    #[serde(default)]
    pub df: Vec<usize>,
    /// Health-noise sweep; defaults to the scenario's own σ²_ε.
    #[serde(default)]
    pub sigma2_eps: Vec<f64>,
    #[serde(default = "forty")]
    pub density_bins: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub scenario1d: Option<Scenario1D>,
    #[serde(default)]
    pub scenario2d: Option<Scenario2D>,
}

fn default_sim_output() -> PathBuf {
    PathBuf::from("twostage-sim")
}
fn one() -> u64 {
    1
}
fn thousand() -> usize {
    1000
}
fn hundred() -> usize {
    100
}
fn forty() -> usize {
    40
}
fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Smallest Monte Carlo size accepted from a config file.
pub const MIN_MC_REPLICATES: usize = 100;

impl SimulateConfig {
    pub fn validate(&self) -> CliResult<()> {
        match (&self.scenario1d, &self.scenario2d) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(CliError::ConfigInvalid(
                    "exactly one of [scenario1d] or [scenario2d] is required".into(),
                ))
            }
        }
        if self.replicates < MIN_MC_REPLICATES {
            return Err(CliError::ConfigInvalid(format!(
                "replicates must be at least {MIN_MC_REPLICATES} (got {})",
                self.replicates
            )));
        }
        if self.methods.is_empty() {
            return Err(CliError::ConfigInvalid("methods must not be empty".into()));
        }
        let boot = self.methods.iter().any(|m| matches!(m, Method::BootOnly | Method::BiasBoot));
        if boot && self.bootstrap_reps < 2 {
            return Err(CliError::ConfigInvalid("bootstrap_reps must be at least 2".into()));
        }
        if self.sigma2_eps.iter().any(|s| !(*s >= 0.0)) {
            return Err(CliError::ConfigInvalid("sigma2_eps values must be non-negative".into()));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
    }
}

/// Reads a config file, applies environment overrides and deserializes it.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<(T, Value)> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::io(path, e),
    })?;
    let mut value: Value = toml::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    apply_env(&mut value, std::env::vars())?;
    let parsed = value
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::ConfigInvalid(format!("{}: {}", path.display(), e.message())))?;
    Ok((parsed, value))
}

pub fn load_analysis(path: &Path) -> CliResult<AnalysisConfig> {
    let (mut cfg, _): (AnalysisConfig, _) = load(path)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

pub fn load_simulate(path: &Path) -> CliResult<SimulateConfig> {
    let (mut cfg, _): (SimulateConfig, _) = load(path)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

/// Parses an override as a TOML literal, falling back to a bare string.
fn parse_override(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn apply_env(root: &mut Value, vars: impl IntoIterator<Item = (String, String)>) -> CliResult<()> {
    let mut overrides: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v)))
        .collect();
    overrides.sort();
    for (key, raw) in overrides {
        let path: Vec<&str> = key.split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::ConfigInvalid(format!("malformed override {ENV_PREFIX}{}", key.to_uppercase())));
        }
        set_path(root, &path, parse_override(&raw)).map_err(|msg| {
            CliError::ConfigInvalid(format!("override {ENV_PREFIX}{}: {msg}", key.to_uppercase()))
        })?;
    }
    Ok(())
}

fn set_path(node: &mut Value, path: &[&str], value: Value) -> Result<(), String> {
    let (head, rest) = path.split_first().expect("non-empty path");
    match node {
        Value::Table(t) => {
            if rest.is_empty() {
                t.insert(head.to_string(), value);
                return Ok(());
            }
            let child = t
                .entry(head.to_string())
                .or_insert_with(|| Value::Table(Default::default()));
            set_path(child, rest, value)
        }
        Value::Array(a) => {
            let i: usize = head.parse().map_err(|_| format!("'{head}' is not an array index"))?;
            let len = a.len();
            let slot = a.get_mut(i).ok_or_else(|| format!("index {i} out of range (length {len})"))?;
            if rest.is_empty() {
                *slot = value;
                Ok(())
            } else {
                set_path(slot, rest, value)
            }
        }
        _ => Err(format!("'{head}' descends into a scalar")),
    }
}
