use std::fs;
use std::path::Path;

use apnea_core::{wavelength_mm, DetectionConfig, ScenarioSpec, SweepPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_CARRIER_HZ: f64 = 79.0e9;

fn default_wavelength() -> f64 {
    wavelength_mm(DEFAULT_CARRIER_HZ)
}

/// Parameters of a `detect` run. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub detection: DetectionConfig,
    /// Carrier wavelength for I/Q input, mm.
    #[serde(default = "default_wavelength")]
    pub wavelength_mm: f64,
    /// Bandpass `displacement` input before the envelope (raw d'(t) input).
    #[serde(default)]
    pub bandpass_displacement: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            wavelength_mm: default_wavelength(),
            bandpass_displacement: false,
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.wavelength_mm > 0.0 && self.wavelength_mm.is_finite()) {
            return Err(CliError::Validation(format!(
                "wavelength_mm must be positive, got {}",
                self.wavelength_mm
            )));
        }
        self.detection.validate()?;
        Ok(())
    }
}

/// Parameters of a `sweep` run besides the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub policy: SweepPolicy,
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, CliError> {
    let spec: ScenarioSpec = load_json(path)?;
    spec.validate()?;
    Ok(spec)
}

/// Documented defaults, shown in `--help`.
pub const DETECT_CONFIG_HELP: &str = "\
Config JSON (all keys optional, unknown keys rejected):
  {
    \"detection\": {
      \"label_threshold\": 0.6,          L_th, binarisation threshold on the averaged labels
      \"min_event_duration\": 10.0,      s, shorter detected runs are dropped
      \"interval\": { \"length\": 60.0,  s, analysis interval T
                    \"step\": 2.5 },     s, interval step
      \"filter\": { \"h1_length\": 6.0,  s, rectangular drift-removal window
                  \"h2_length\": 1.1,    s, Hann smoothing window
                  \"envelope_length\": 5.0 },  s, RMS envelope window
      \"rule\": { \"beta\": 0.7 },         largest mu2/mu1 ratio counted as apnea
      \"em\": { \"max_iter\": 200, \"tol\": 1e-8, \"restarts\": 0, \"seed\": 0 }
    },
    \"wavelength_mm\": 3.7948,           c / 79 GHz, used for iq input
    \"bandpass_displacement\": false,    filter displacement input as raw d'(t)
    \"seed\": null                       overrides detection.em.seed
  }";

macro_rules! scenario_help {
    () => {
        "\
Scenario JSON: { \"segments\": [ { \"kind\": \"normal|apnea|movement\", \"duration\": s,
  \"amplitude\": mm, \"period\": s }, ... ], \"sample_rate\": 10.0, \"noise_std\": 0.0, \"seed\": 0 }"
    };
}

pub const SCENARIO_HELP: &str = scenario_help!();

pub const SWEEP_CONFIG_HELP: &str = concat!(
    scenario_help!(),
    "
Every movement segment takes each d_m / T_m pair in turn.
Optional --config JSON: { \"policy\": { \"interval\": { \"length\": 60.0, \"step\": 2.5 },
  \"filter\": { \"h1_length\": 6.0, \"h2_length\": 1.1, \"envelope_length\": 5.0 },
  \"em\": { \"max_iter\": 200, \"tol\": 1e-8, \"restarts\": 0, \"seed\": 0 },
  \"bandpass\": false } }"
);
