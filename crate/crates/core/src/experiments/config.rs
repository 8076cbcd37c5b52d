//! TOML description of a custom experiment for the `run` subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::figures::{EtaPlan, SeriesSpec};
use super::{ExperimentError, OracleKind};
use crate::bnsl::EtaSchedule;

/// ```toml
/// name = "wide"
/// n_t = 6
/// n_r = 2
/// trials = 50
/// cycles = 8
/// seed = 3
/// oracle = "radio"
/// eta_db = [-6.0, -8.0, -15.0]
/// ```
///
/// Exactly one of `eta`, `eta_db` or `adaptive` selects the accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_t: usize,
    pub n_r: usize,
    pub trials: usize,
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleKind,
    /// Per-sweep accuracies; the last one repeats.
    pub eta: Option<Vec<f64>>,
    /// The same in dB, `η = 10^(dB/10)`.
    pub eta_db: Option<Vec<f64>>,
    /// Coefficient `a` of the adaptive rule `η = a·P/‖G‖`.
    pub adaptive: Option<f64>,
    #[serde(default)]
    pub stop_on_convergence: bool,
    /// Output directory; the command line may override it.
    pub out: Option<PathBuf>,
}

fn default_name() -> String {
    "custom".into()
}

fn default_cycles() -> usize {
    8
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials < 1 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.n_r == 0 || self.n_r >= self.n_t {
            return Err(ExperimentError::Config(format!(
                "need 0 < n_r < n_t, got n_r={} n_t={}",
                self.n_r, self.n_t
            )));
        }
        if self.cycles == 0 {
            return Err(ExperimentError::Config("cycles must be at least 1".into()));
        }
        let chosen = [self.eta.is_some(), self.eta_db.is_some(), self.adaptive.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if chosen != 1 {
            return Err(ExperimentError::Config(
                "set exactly one of eta, eta_db or adaptive".into(),
            ));
        }
        if let Some(v) = self.eta.as_ref().or(self.eta_db.as_ref()) {
            if v.is_empty() {
                return Err(ExperimentError::Config("empty accuracy list".into()));
            }
        }
        if let Some(v) = &self.eta {
            if v.iter().any(|e| !(*e > 0.0)) {
                return Err(ExperimentError::Config("every eta must be positive".into()));
            }
        }
        if let Some(a) = self.adaptive {
            if !(a > 0.0) {
                return Err(ExperimentError::Config("adaptive coefficient must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn series(&self) -> SeriesSpec {
        let eta = if let Some(a) = self.adaptive {
            EtaPlan::Adaptive {
                coefficient: a,
                floor: 1e-10,
            }
        } else if let Some(db) = &self.eta_db {
            EtaPlan::Schedule(EtaSchedule::from_db(db))
        } else {
            let v = self.eta.clone().expect("validated");
            EtaPlan::Schedule(if v.len() == 1 {
                EtaSchedule::Constant(v[0])
            } else {
                EtaSchedule::PerSweep(v)
            })
        };
        SeriesSpec {
            label: self.name.clone(),
            n_t: self.n_t,
            n_r: self.n_r,
            trials: self.trials,
            cycles: self.cycles,
            eta,
            oracle: self.oracle,
            seed: self.seed,
            stop_on_convergence: self.stop_on_convergence,
        }
    }
}
