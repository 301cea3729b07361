use serde::{Deserialize, Serialize};

/// Training hyperparameters. Episode length comes from the environment
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Transitions per agent buffer before each update phase (C).
    pub buffer: usize,
    /// Minibatch size (N).
    pub minibatch: usize,
    /// Total training episodes (M).
    pub episodes: u64,
    /// Overrides the epoch count derived from `episodes`.
    pub epochs: Option<u64>,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    /// Gradient iterations per update phase (K).
    pub update_steps: usize,
    /// Epochs (1-based) during which failed arm episodes are relabeled.
    pub her_epochs: u64,
    /// Update counter up to which guidance is active (k_g).
    pub guidance_epochs: u64,
    /// Registered guidance strategy name.
    pub guidance: String,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub arm_hidden: Vec<usize>,
    pub base_hidden: Vec<usize>,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            buffer: 80_000,
            minibatch: 8_000,
            episodes: 240_000,
            epochs: None,
            gamma: 0.96,
            lambda: 0.95,
            clip: 0.1,
            update_steps: 90,
            her_epochs: 70,
            guidance_epochs: 15,
            guidance: "tesg".into(),
            lr_actor: 2e-4,
            lr_critic: 1e-4,
            value_coef: 0.5,
            entropy_coef: 0.0,
            arm_hidden: vec![256, 256, 128],
            base_hidden: vec![32, 128, 32],
            eval_every: 5,
            eval_episodes: 200,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    /// Episodes needed to fill a buffer of `buffer` transitions.
    pub fn episodes_per_epoch(&self, horizon: u32) -> usize {
        self.buffer.div_ceil(horizon as usize)
    }

    /// `M·T/C`, rounded up, unless overridden.
    pub fn epochs(&self, horizon: u32) -> u64 {
        self.epochs
            .unwrap_or_else(|| (self.episodes * horizon as u64).div_ceil(self.buffer as u64))
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("train.buffer", self.buffer as f64),
            ("train.minibatch", self.minibatch as f64),
            ("train.episodes", self.episodes as f64),
            ("train.update_steps", self.update_steps as f64),
            ("train.eval_every", self.eval_every as f64),
            ("train.eval_episodes", self.eval_episodes as f64),
            ("train.checkpoint_every", self.checkpoint_every as f64),
            ("train.lr_actor", self.lr_actor),
            ("train.lr_critic", self.lr_critic),
            ("train.clip", self.clip),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.epochs == Some(0) {
            return Err("train.epochs must be positive".into());
        }
        if self.minibatch > self.buffer {
            return Err(format!(
                "train.minibatch ({}) must not exceed train.buffer ({})",
                self.minibatch, self.buffer
            ));
        }
        for (name, v) in [("train.gamma", self.gamma), ("train.lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [("train.value_coef", self.value_coef), ("train.entropy_coef", self.entropy_coef)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, h) in [("train.arm_hidden", &self.arm_hidden), ("train.base_hidden", &self.base_hidden)] {
            if h.is_empty() || h.contains(&0) {
                return Err(format!("{name} must list positive layer widths"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_is_150_epochs_of_1600_episodes() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs(50), 150);
        assert_eq!(c.episodes_per_epoch(50), 1600);
        c.validate().unwrap();
    }

    #[test]
    fn minibatch_larger_than_buffer_is_rejected() {
        let c = TrainConfig {
            minibatch: 10,
            buffer: 5,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().contains("minibatch"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml_like_json(r#"{"bufer": 10}"#);
        assert!(err.contains("unknown field"), "{err}");
    }

    fn toml_like_json(s: &str) -> String {
        serde_json::from_str::<TrainConfig>(s).unwrap_err().to_string()
    }
}
