use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacearm_core::env::{EnvConfig, ScenarioRegistry, SuccessThresholds};
use spacearm_learn::eval::parse_grid;
use spacearm_learn::trainer::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub thresholds: SuccessThresholds,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            thresholds: SuccessThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    /// Episodes per grid point and seed.
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// `start:step:end` per scenario name.
    pub grids: BTreeMap<String, String>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        let grids = [
            ("spin", "0:0.05:0.20"),
            ("base-impulse", "0:0.5:2.0"),
            ("obs-delay", "0:0.1:0.5"),
            ("act-delay", "0:0.1:0.5"),
            ("eff-base", "0:0.1:0.5"),
            ("eff-manip", "0:0.1:0.5"),
            ("momentum-sat", "0:0.25:1.0"),
            ("base-mass", "-0.5:0.25:0.5"),
            ("obs-bias-pos", "0:0.02:0.10"),
            ("obs-bias-ori", "0:0.05:0.20"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self {
            episodes: 200,
            seeds: vec![0, 1, 2],
            grids,
        }
    }
}

/// Everything a run depends on. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Model parameter file; the bundled UR5-on-cube model when absent.
    pub model: Option<PathBuf>,
    pub seed: u64,
    /// Root for run directories; `SPACEARM_OUTPUT_ROOT` takes precedence.
    pub output: PathBuf,
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub eval: EvalConfig,
    pub robustness: RobustnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            seed: 0,
            output: PathBuf::from("runs"),
            train: TrainConfig::default(),
            env: EnvConfig::default(),
            eval: EvalConfig::default(),
            robustness: RobustnessConfig::default(),
        }
    }
}

pub const OUTPUT_ROOT_ENV: &str = "SPACEARM_OUTPUT_ROOT";

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |r: Result<(), String>| r.map_err(CliError::Validation);
        v(self.train.validate())?;
        v(self.env.validate())?;
        if let Some(m) = &self.model {
            if !m.is_file() {
                return Err(CliError::Validation(format!("model file {} does not exist", m.display())));
            }
        }
        if self.eval.episodes == 0 || self.robustness.episodes == 0 {
            return Err(CliError::Validation("episode counts must be positive".into()));
        }
        if self.robustness.seeds.is_empty() {
            return Err(CliError::Validation("robustness.seeds must not be empty".into()));
        }
        let scenarios = ScenarioRegistry::builtin();
        for (name, grid) in &self.robustness.grids {
            if scenarios.get(name).is_none() {
                return Err(CliError::Validation(format!("robustness.grids: unknown scenario {name:?}")));
            }
            parse_grid(grid).map_err(|e| CliError::Validation(format!("robustness.grids.{name}: {e}")))?;
        }
        Ok(())
    }

    /// Output root after the environment override.
    pub fn output_root(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| self.output.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_names_the_field() {
        let err = RunConfig::from_toml_str("[train]\nbuffr = 3\n").unwrap_err().to_string();
        assert!(err.contains("buffr"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.train.minibatch = cfg.train.buffer + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.robustness.grids.insert("warp".into(), "0:1:2".into());
        assert!(cfg.validate().unwrap_err().to_string().contains("warp"));
        let cfg = RunConfig {
            model: Some(PathBuf::from("/nonexistent/model.toml")),
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("does not exist"));
    }
}
