use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use wpreach_core::ModelParams;

pub const DEFAULT_SEED: u64 = 2026;

/// One JSON document holding the model parameters and every subcommand setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    /// Monte-Carlo draws for the Ingham constants.
    pub draws: usize,
    pub seed: u64,
    /// Window slack in the kernel-sum bounds.
    pub epsilon: f64,
    /// Modes used for the Ingham estimates.
    pub ingham_modes: usize,
    /// Time step of the forward simulation; `T / 20000` when absent.
    pub dt: Option<f64>,
    /// Simulated modes; `params.modes` when absent.
    pub sim_modes: Option<usize>,
    pub target_file: Option<PathBuf>,
    pub controls_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: ModelParams::default(),
            draws: 1000,
            seed: DEFAULT_SEED,
            epsilon: 0.1,
            ingham_modes: 16,
            dt: None,
            sim_modes: None,
            target_file: None,
            controls_file: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    /// Defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        anyhow::ensure!(self.epsilon > 0.0 && self.epsilon < 1.0, "epsilon must lie in (0, 1)");
        anyhow::ensure!(self.ingham_modes >= 2, "ingham_modes must be at least 2");
        if let Some(dt) = self.dt {
            anyhow::ensure!(dt > 0.0 && dt.is_finite(), "dt must be positive");
        }
        if let Some(s) = self.sim_modes {
            anyhow::ensure!(s >= 1, "sim_modes must be at least 1");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.params.horizon / 20000.0)
    }

    pub fn sim_modes(&self) -> usize {
        self.sim_modes.unwrap_or(self.params.modes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.params, ModelParams::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sed": 7}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"params": {"beta": 0.5, "eta": 1.0, "a": 0.1, "b": 0.1, "modes": 8, "horizon": 7.0, "c": 1}}"#).is_err());
    }

    #[test]
    fn memory_equal_to_decay_rejected() {
        let text = r#"{"params": {"beta": 1.0, "eta": 1.0, "a": 0.1, "b": 0.1, "modes": 8, "horizon": 7.0}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn short_horizon_loads() {
        let text = r#"{"params": {"beta": 0.5, "eta": 1.0, "a": 0.1, "b": 0.1, "modes": 8, "horizon": 5.0}}"#;
        assert_eq!(ExperimentConfig::from_json(text).unwrap().params.horizon, 5.0);
    }
}
