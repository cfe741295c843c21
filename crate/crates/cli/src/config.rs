//! Run configuration: a TOML file with one section per scenario, plus `--set`
//! overrides applied on top before validation.

use std::fmt;
use std::path::Path;

use nv_odmr::photophysics::RateConstants;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem, with a source position when one is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
            key: None,
            line: None,
            column: None,
        }
    }

    pub fn at_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.into()),
            ..ConfigError::new(message)
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    CwSingle,
    PulsedSingle,
    Ensemble,
    Hyperfine,
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Cw,
    Pulsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKindName {
    Lorentzian,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulsedMode {
    #[default]
    Fixed,
    Optimize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub gamma: Option<f64>,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
}

impl ModelOverrides {
    pub fn rates(&self) -> Result<RateConstants<f64>, ConfigError> {
        let d = RateConstants::<f64>::default();
        RateConstants::new(
            self.gamma.unwrap_or(d.gamma),
            self.k0.unwrap_or(d.k0),
            self.k1.unwrap_or(d.k1),
            self.d0.unwrap_or(d.d0),
            self.d1.unwrap_or(d.d1),
        )
        .map_err(|e| ConfigError::at_key("model", e.to_string()))
    }
}

fn default_t2_single() -> f64 {
    3.0
}
fn default_epsilon() -> f64 {
    0.0098
}
fn default_b() -> f64 {
    0.0031
}
fn default_wait() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwSweepConfig {
    #[serde(default = "default_t2_single")]
    pub t2star: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub s: Vec<f64>,
    /// Ω/2π values, MHz.
    pub rabi_mhz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsedSweepConfig {
    #[serde(default)]
    pub mode: PulsedMode,
    #[serde(default = "default_t2_single")]
    pub t2star: f64,
    #[serde(default = "default_wait")]
    pub t_w: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub s: Vec<f64>,
    /// π-pulse durations, µs. Without `rabi_mhz` each sets `Ω = π/t_π`.
    #[serde(default)]
    pub t_pi: Vec<f64>,
    /// Ω/2π values, MHz. Without `t_pi` the dephasing-optimal pulse is used.
    #[serde(default)]
    pub rabi_mhz: Vec<f64>,
    #[serde(default)]
    pub t_l: Vec<f64>,
    /// Readout windows, µs. Empty means `τ = t_L`.
    #[serde(default)]
    pub tau: Vec<f64>,
    pub coarse_points: Option<usize>,
}

fn default_protocols() -> Vec<ProtocolName> {
    vec![ProtocolName::Cw, ProtocolName::Pulsed]
}
fn default_background() -> Vec<f64> {
    vec![0.0]
}
fn default_density() -> f64 {
    300.0
}
fn default_t2_ensemble() -> f64 {
    1.0
}
fn default_thickness() -> f64 {
    500.0
}
fn default_epsilon_max() -> f64 {
    0.01
}
fn default_isat() -> f64 {
    nv_odmr::ensemble::SATURATION_INTENSITY
}
fn default_carbon() -> f64 {
    nv_odmr::ensemble::DIAMOND_CARBON_DENSITY_CM3
}
fn default_shells() -> usize {
    nv_odmr::ensemble::DEFAULT_SHELLS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleRunConfig {
    pub waist_um: Vec<f64>,
    pub power_mw: Vec<f64>,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolName>,
    /// Background in units of the level that equals the NV fluorescence.
    #[serde(default = "default_background")]
    pub background_relative: Vec<f64>,
    #[serde(default = "default_density")]
    pub nv_density_ppb: f64,
    #[serde(default = "default_t2_ensemble")]
    pub t2star: f64,
    #[serde(default = "default_thickness")]
    pub thickness_um: f64,
    #[serde(default = "default_epsilon_max")]
    pub epsilon_max: f64,
    #[serde(default = "default_isat")]
    pub saturation_intensity: f64,
    #[serde(default = "default_carbon")]
    pub carbon_density_cm3: f64,
    #[serde(default = "default_wait")]
    pub wait_time: f64,
    #[serde(default = "default_shells")]
    pub n_shells: usize,
    pub cw_coarse_points: Option<usize>,
    pub pulsed_coarse_points: Option<usize>,
}

fn default_kinds() -> Vec<LineKindName> {
    vec![LineKindName::Lorentzian, LineKindName::Gaussian]
}
fn default_splitting() -> f64 {
    nv_odmr::lineshape::HYPERFINE_SPLITTING_MHZ
}
fn default_contrast() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineConfig {
    #[serde(default = "default_kinds")]
    pub kinds: Vec<LineKindName>,
    pub fwhm_mhz: Vec<f64>,
    /// Total contrast, shared equally by the three components.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_splitting")]
    pub splitting_mhz: f64,
}

fn default_opt_s() -> Vec<f64> {
    vec![0.024]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub protocol: ProtocolName,
    #[serde(default = "default_t2_single")]
    pub t2star: f64,
    #[serde(default = "default_wait")]
    pub t_w: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    /// Saturation parameters for the pulsed protocol; CW optimizes `s` itself.
    #[serde(default = "default_opt_s")]
    pub s: Vec<f64>,
    pub coarse_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub model: ModelOverrides,
    pub cw: Option<CwSweepConfig>,
    pub pulsed: Option<PulsedSweepConfig>,
    pub ensemble: Option<EnsembleRunConfig>,
    pub hyperfine: Option<HyperfineConfig>,
    pub optimize: Option<OptimizeConfig>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn toml_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let mut e = ConfigError::new(err.message().trim().to_string());
    if let Some(span) = err.span() {
        let (line, col) = line_col(text, span.start);
        e.line = Some(line);
        e.column = Some(col);
    }
    e
}

/// Parses `key=value` and writes it into `table` along the dotted path. Values are
/// read as TOML literals, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::at_key(key, "empty path component"));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::at_key(key, format!("`{part}` is not a section")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text and applies overrides. Errors carry line numbers when the
    /// problem is in the file itself.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return toml::from_str(text).map_err(|e| toml_error(text, &e));
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError::new(e.to_string()))?;
        toml::from_str(&merged).map_err(|e| ConfigError::new(format!("after overrides: {}", e.message().trim())))
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Canonical TOML of the fully resolved configuration, defaults included.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// SHA-256 of [`RunConfig::resolved_toml`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_toml().as_bytes()))
    }

    /// Checks every present section; each subcommand additionally requires its own.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.rates()?;
        if let Some(c) = &self.cw {
            c.validate()?;
        }
        if let Some(c) = &self.pulsed {
            c.validate()?;
        }
        if let Some(c) = &self.ensemble {
            c.validate()?;
        }
        if let Some(c) = &self.hyperfine {
            c.validate()?;
        }
        if let Some(c) = &self.optimize {
            c.validate()?;
        }
        Ok(())
    }

    pub fn check_scenario(&self, allowed: &[Scenario]) -> Result<(), ConfigError> {
        match self.scenario {
            Some(s) if !allowed.contains(&s) => Err(ConfigError::at_key(
                "scenario",
                format!("scenario {s:?} cannot be run by this subcommand"),
            )),
            _ => Ok(()),
        }
    }
}

fn non_empty(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(ConfigError::at_key(key, "sweep axis is empty"));
    }
    all_positive(key, v)
}

fn all_positive(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(ConfigError::at_key(key, format!("values must be finite and > 0, got {x}")));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    all_positive(key, &[v])
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(ConfigError::at_key(key, format!("must be finite and ≥ 0, got {v}")));
    }
    Ok(())
}

fn efficiency(key: &str, v: f64) -> Result<(), ConfigError> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(ConfigError::at_key(key, format!("must lie in (0, 1], got {v}")));
    }
    Ok(())
}

impl CwSweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        non_empty("cw.s", &self.s)?;
        non_empty("cw.rabi_mhz", &self.rabi_mhz)?;
        positive("cw.t2star", self.t2star)?;
        efficiency("cw.epsilon", self.epsilon)?;
        non_negative("cw.b", self.b)
    }
}

impl PulsedSweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        non_empty("pulsed.s", &self.s)?;
        positive("pulsed.t2star", self.t2star)?;
        non_negative("pulsed.t_w", self.t_w)?;
        efficiency("pulsed.epsilon", self.epsilon)?;
        non_negative("pulsed.b", self.b)?;
        all_positive("pulsed.t_pi", &self.t_pi)?;
        all_positive("pulsed.rabi_mhz", &self.rabi_mhz)?;
        all_positive("pulsed.tau", &self.tau)?;
        if self.mode == PulsedMode::Fixed {
            non_empty("pulsed.t_l", &self.t_l)?;
            if self.t_pi.is_empty() && self.rabi_mhz.is_empty() {
                return Err(ConfigError::at_key("pulsed.t_pi", "fixed mode needs t_pi or rabi_mhz"));
            }
        }
        if self.coarse_points == Some(0) {
            return Err(ConfigError::at_key("pulsed.coarse_points", "must be ≥ 1"));
        }
        Ok(())
    }
}

impl EnsembleRunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        non_empty("ensemble.waist_um", &self.waist_um)?;
        non_empty("ensemble.power_mw", &self.power_mw)?;
        if self.protocols.is_empty() {
            return Err(ConfigError::at_key("ensemble.protocols", "no protocol selected"));
        }
        if self.background_relative.is_empty() {
            return Err(ConfigError::at_key("ensemble.background_relative", "sweep axis is empty"));
        }
        for &b in &self.background_relative {
            non_negative("ensemble.background_relative", b)?;
        }
        positive("ensemble.nv_density_ppb", self.nv_density_ppb)?;
        positive("ensemble.t2star", self.t2star)?;
        positive("ensemble.thickness_um", self.thickness_um)?;
        efficiency("ensemble.epsilon_max", self.epsilon_max)?;
        positive("ensemble.saturation_intensity", self.saturation_intensity)?;
        positive("ensemble.carbon_density_cm3", self.carbon_density_cm3)?;
        non_negative("ensemble.wait_time", self.wait_time)?;
        if self.n_shells < 50 {
            return Err(ConfigError::at_key("ensemble.n_shells", "need at least 50 shells"));
        }
        Ok(())
    }
}

impl HyperfineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        non_empty("hyperfine.fwhm_mhz", &self.fwhm_mhz)?;
        if self.kinds.is_empty() {
            return Err(ConfigError::at_key("hyperfine.kinds", "no line kind selected"));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(ConfigError::at_key("hyperfine.contrast", "must lie in (0, 1)"));
        }
        positive("hyperfine.splitting_mhz", self.splitting_mhz)
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("optimize.t2star", self.t2star)?;
        non_negative("optimize.t_w", self.t_w)?;
        efficiency("optimize.epsilon", self.epsilon)?;
        non_negative("optimize.b", self.b)?;
        if self.protocol == ProtocolName::Pulsed {
            non_empty("optimize.s", &self.s)?;
        }
        Ok(())
    }
}
