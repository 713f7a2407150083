//! Scenario configuration: a flat TOML file with `[state]`, `[gate]`,
//! `[instrument]`, `[grid]`, and `[run]` sections, plus the bundled presets.
//!
//! Unknown keys are hard errors; parse errors carry line numbers. All
//! parameters validate through the owning modules before a run starts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::HeraldPolicy;
use crate::model::{
    angfreq_resolution, angfreq_to_wavelength, BiphotonState, GatePulse, ModelError,
};
use crate::simulate::{InstrumentResponse, SimulateError};

pub const REQUIRED_KEYS: &str = "\
[state]: sigma_s, sigma_i, rho, center_s, center_i, chirp_s, chirp_i
[gate]: tau_g
[instrument]: res_lambda_s, res_lambda_i
[grid]: half_span_sigmas, n
[run]: name, total_counts, mc_trials, seed";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario file is empty; required keys:\n{REQUIRED_KEYS}")]
    Empty,
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid state parameters: {0}")]
    State(#[from] ModelError),
    #[error("invalid instrument parameters: {0}")]
    Instrument(#[from] SimulateError),
    #[error("invalid run parameters: {0}")]
    Run(String),
    #[error("unknown preset {0:?}; available: {1}")]
    UnknownPreset(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    /// Marginal bandwidths in rad/ps.
    pub sigma_s: f64,
    pub sigma_i: f64,
    pub rho: f64,
    /// Central angular frequencies in rad/ps.
    pub center_s: f64,
    pub center_i: f64,
    /// Quadratic spectral phase in ps^2.
    pub chirp_s: f64,
    pub chirp_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    /// Gate intensity temporal width in ps.
    pub tau_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig {
    /// Monochromator resolutions in nm, converted to rad/ps at the state's
    /// central wavelengths.
    pub res_lambda_s: f64,
    pub res_lambda_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_span_sigmas: f64,
    pub n: usize,
}

fn default_min_peak_fraction() -> f64 {
    0.5
}
fn default_min_slices() -> usize {
    3
}
fn default_significance() -> f64 {
    crate::witness::DEFAULT_SIGNIFICANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub total_counts: f64,
    pub mc_trials: usize,
    pub seed: u64,
    /// Heralded-slice policy: minimum marginal weight relative to the peak
    /// slice, and the minimum number of qualifying slices.
    #[serde(default = "default_min_peak_fraction")]
    pub herald_min_peak_fraction: f64,
    #[serde(default = "default_min_slices")]
    pub herald_min_slices: usize,
    /// Verdict significance in standard deviations.
    #[serde(default = "default_significance")]
    pub significance: f64,
}

/// One fully specified simulation-and-analysis scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub state: StateConfig,
    pub gate: GateConfig,
    pub instrument: InstrumentConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
}

pub const PRESET_NAMES: [&str; 5] = ["table1", "fig4a", "fig4b", "fig4c", "fig4d"];

const PRESET_SOURCES: [(&str, &str); 5] = [
    ("table1", include_str!("../presets/table1.toml")),
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig4c", include_str!("../presets/fig4c.toml")),
    ("fig4d", include_str!("../presets/fig4d.toml")),
];

impl Scenario {
    /// Parse and validate a scenario from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        if text.trim().is_empty() {
            return Err(ScenarioError::Empty);
        }
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Load a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// One of the bundled presets.
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        PRESET_SOURCES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, src)| Self::from_toml(src).expect("bundled presets are valid"))
            .ok_or_else(|| {
                ScenarioError::UnknownPreset(name.to_string(), PRESET_NAMES.join(", "))
            })
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        self.biphoton_state()?;
        self.gate_pulse()?;
        self.spectral_response()?;
        if !(self.run.total_counts.is_finite() && self.run.total_counts >= 0.0) {
            return Err(ScenarioError::Run(format!(
                "total_counts must be non-negative, got {}",
                self.run.total_counts
            )));
        }
        if !(0.0 < self.run.herald_min_peak_fraction && self.run.herald_min_peak_fraction <= 1.0) {
            return Err(ScenarioError::Run(format!(
                "herald_min_peak_fraction must be in (0, 1], got {}",
                self.run.herald_min_peak_fraction
            )));
        }
        if !(self.run.significance.is_finite() && self.run.significance > 0.0) {
            return Err(ScenarioError::Run(format!(
                "significance must be positive, got {}",
                self.run.significance
            )));
        }
        Ok(())
    }

    pub fn biphoton_state(&self) -> Result<BiphotonState, ModelError> {
        BiphotonState::new(
            self.state.sigma_s,
            self.state.sigma_i,
            self.state.rho,
            self.state.center_s,
            self.state.center_i,
            self.state.chirp_s,
            self.state.chirp_i,
        )
    }

    pub fn gate_pulse(&self) -> Result<GatePulse, ModelError> {
        // upconverted carrier bookkeeping only; the sum of the centers has no
        // effect on any moment
        GatePulse::new(self.gate.tau_g, 0.0)
    }

    /// Monochromator responses converted to rad/ps at the configured centers.
    pub fn spectral_response(&self) -> Result<InstrumentResponse, ScenarioError> {
        let lambda_s = angfreq_to_wavelength(self.state.center_s)?;
        let lambda_i = angfreq_to_wavelength(self.state.center_i)?;
        let res_s = angfreq_resolution(lambda_s, self.instrument.res_lambda_s)?;
        let res_i = angfreq_resolution(lambda_i, self.instrument.res_lambda_i)?;
        Ok(InstrumentResponse::new(res_s, res_i)?)
    }

    /// Per-axis temporal response of the optical gating.
    pub fn temporal_response(&self) -> Result<InstrumentResponse, ScenarioError> {
        Ok(InstrumentResponse::new(self.gate.tau_g, self.gate.tau_g)?)
    }

    pub fn herald_policy(&self) -> HeraldPolicy {
        HeraldPolicy {
            min_peak_fraction: self.run.herald_min_peak_fraction,
            min_slices: self.run.herald_min_slices,
        }
    }
}
