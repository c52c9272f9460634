//! JSON run configuration.
//!
//! A configuration file has one required section, `plant`, and optional
//! `experiment`, `bmsb`, `bounds` and `diagnostics` sections. Missing
//! optional fields take the defaults below. If `plant.theta0` is absent the
//! initial estimate is drawn with standard normal entries from the reserved
//! initial-estimate stream of `experiment.seed`. See the README for the full
//! schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{BmsbParams, MgfOptions};
use crate::controller::ControlMode;
use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig};
use crate::linalg::Matrix;
use crate::system::{NoiseSpec, PlantConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    a: Matrix,
    b: Matrix,
    kappa: usize,
    u_max: f64,
    c: f64,
    x0: Vec<f64>,
    disturbance: NoiseSpec,
    excitation: NoiseSpec,
    #[serde(default)]
    theta0: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mode: ControlMode,
    /// Initial states for the varying-`x0` suite.
    pub x0_set: Vec<Vec<f64>>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: experiments::DEFAULT_TRIALS,
            horizon: experiments::DEFAULT_HORIZON,
            seed: 0,
            mode: ControlMode::Adaptive,
            x0_set: experiments::default_x0_set(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Drift radius; the admissible midpoint when absent.
    pub epsilon: Option<f64>,
    pub deltas: Vec<f64>,
    pub taus: Vec<u64>,
    pub mgf_samples: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { epsilon: None, deltas: vec![0.2, 0.1, 0.05], taus: vec![0, 10, 100, 1000, 10_000], mgf_samples: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub delta: f64,
    pub trials: usize,
    /// Raw-step horizon of the estimation coverage run; burn-in time plus 1000 when absent.
    pub horizon: Option<usize>,
    /// Envelope checks at these multiples of the stabilization time.
    pub tau_multiples: Vec<u64>,
    pub epsilon: Option<f64>,
    pub drift_states: usize,
    pub drift_inner_samples: usize,
    pub matrix_samples: usize,
    pub control_samples: usize,
    pub zeta_samples: usize,
    pub bmsb_trials: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            delta: 0.2,
            trials: 50,
            horizon: None,
            tau_multiples: vec![1, 2, 4],
            epsilon: None,
            drift_states: 50,
            drift_inner_samples: 10_000,
            matrix_samples: 10_000,
            control_samples: 100_000,
            zeta_samples: 200,
            bmsb_trials: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: RawPlant,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    bmsb: Option<BmsbParams>,
    #[serde(default)]
    bounds: BoundsSection,
    #[serde(default)]
    diagnostics: DiagnosticsSection,
}

/// A resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub plant: PlantConfig,
    pub experiment: ExperimentSection,
    pub bmsb: Option<BmsbParams>,
    pub bounds: BoundsSection,
    pub diagnostics: DiagnosticsSection,
}

impl Config {
    pub fn from_value(value: Value) -> Result<Self> {
        let raw: RawConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        let p = raw.plant;
        let theta0 = match p.theta0 {
            Some(t) => t,
            None => experiments::random_theta0(p.a.rows(), p.b.cols(), raw.experiment.seed),
        };
        let plant = PlantConfig {
            a: p.a,
            b: p.b,
            kappa: p.kappa,
            disturbance: p.disturbance,
            excitation: p.excitation,
            u_max: p.u_max,
            c: p.c,
            x0: p.x0,
            theta0,
        };
        plant.validate()?;
        let cfg = Self { plant, experiment: raw.experiment, bmsb: raw.bmsb, bounds: raw.bounds, diagnostics: raw.diagnostics };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text, overrides)
    }

    fn validate(&self) -> Result<()> {
        let n = self.plant.n();
        if let Some(b) = &self.bmsb {
            b.validate(n + self.plant.m())?;
        }
        if self.experiment.x0_set.iter().any(|x| x.len() != n) {
            return Err(Error::Config(format!("every x0_set entry must have length {n}")));
        }
        for &d in self.bounds.deltas.iter().chain([&self.diagnostics.delta]) {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!("delta {d} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            plant: self.plant.clone(),
            trials: self.experiment.trials,
            horizon: self.experiment.horizon,
            master_seed: self.experiment.seed,
            mode: self.experiment.mode,
            bmsb: self.bmsb.clone(),
        }
    }

    pub fn require_bmsb(&self) -> Result<&BmsbParams> {
        self.bmsb.as_ref().ok_or_else(|| Error::Config("this command needs a `bmsb` section".into()))
    }

    pub fn mgf_options(&self) -> MgfOptions {
        MgfOptions { samples: self.bounds.mgf_samples, seed: self.experiment.seed }
    }
}

/// Applies `dotted.path=value`. The value is parsed as JSON and taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Config(format!("empty key in override `{spec}`")));
        }
        let obj = cur.as_object_mut().ok_or_else(|| Error::Config(format!("`{}` is not an object", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry(*key).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one key")
}
