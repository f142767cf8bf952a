//! Mean-field hybrid-action PPO.
//!
//! Each UAV observes its own position, the sensor AoIs and the mean field of
//! its neighbors, and samples a sensor (categorical) together with a flight
//! command (Gaussian). The joint log-probability is the sum of the two parts.
//! After every rollout phase the policy is optimized for several epochs on
//! the clipped surrogate, a value loss and an entropy bonus; then the
//! sampling snapshot is synchronized and the buffer dropped.

pub mod buffer;
pub mod loss;
pub mod policy;
pub mod trainer;

pub use buffer::{RolloutBuffer, Trajectory, Transition};
pub use loss::{
    clipped_surrogate, combined_entropy, gae, normalize_advantages, ppo_clip_loss, total_loss, EntropyMode,
};
pub use policy::{LossCoefficients, LossParts, PolicyNets, PolicyShape, SampledAction, SequenceBatch};
pub use trainer::{evaluate, train, train_with, EpisodeStats, TrainOutcome, Trainer};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Clip threshold ε of the surrogate.
    pub clip: f64,
    /// Weight of the value loss.
    pub value_coef: f64,
    /// Weight of the entropy bonus.
    pub entropy_coef: f64,
    pub entropy_mode: EntropyMode,
    /// Optimization epochs per rollout phase.
    pub epochs: usize,
    /// Steps stored per agent before optimizing.
    pub buffer_capacity: usize,
    /// Number of minibatches each epoch is split into.
    pub minibatches: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub lstm_enabled: bool,
    /// Recurrent width; `hidden_width` when unset.
    pub lstm_hidden: Option<usize>,
    /// One network shared by all UAVs, or one per UAV.
    pub share_parameters: bool,
    /// Multiplies rewards before advantage and return estimation.
    pub reward_scale: f64,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Global gradient-norm clip; disabled when unset.
    pub max_grad_norm: Option<f64>,
    /// Treat the end of an episode as a time-limit truncation and bootstrap
    /// from the critic instead of zero.
    pub bootstrap_at_time_limit: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            value_coef: 0.2,
            entropy_coef: 3.0,
            entropy_mode: EntropyMode::Product,
            epochs: 8,
            buffer_capacity: 40,
            minibatches: 4,
            hidden_width: 256,
            hidden_layers: 2,
            lstm_enabled: true,
            lstm_hidden: None,
            share_parameters: true,
            reward_scale: 1.0,
            log_std_init: 0.5f64.ln(),
            log_std_min: -5.0,
            log_std_max: 1.0,
            max_grad_norm: None,
            bootstrap_at_time_limit: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return fail("clip must lie in (0, 1)");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return fail("loss coefficients must be non-negative");
        }
        if self.epochs == 0 || self.buffer_capacity == 0 || self.minibatches == 0 {
            return fail("epochs, buffer_capacity and minibatches must be at least 1");
        }
        if self.hidden_width == 0 || self.lstm_hidden == Some(0) {
            return fail("layer widths must be at least 1");
        }
        if !(self.reward_scale > 0.0) {
            return fail("reward_scale must be positive");
        }
        if !(self.log_std_min <= self.log_std_init && self.log_std_init <= self.log_std_max) {
            return fail("log_std_init must lie within [log_std_min, log_std_max]");
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0) {
                return fail("max_grad_norm must be positive");
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip: self.clip,
            value: self.value_coef,
            entropy: self.entropy_coef,
            entropy_mode: self.entropy_mode,
        }
    }

    pub fn shape(&self, input_dim: usize, num_sensors: usize) -> PolicyShape {
        PolicyShape {
            input_dim,
            num_sensors,
            lstm_hidden: self.lstm_enabled.then(|| self.lstm_hidden.unwrap_or(self.hidden_width)),
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            log_std_init: self.log_std_init,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let c = PpoConfig::default();
        assert_eq!((c.value_coef, c.entropy_coef), (0.2, 3.0));
        assert_eq!(c.learning_rate, 3e-4);
        assert_eq!((c.clip, c.gamma), (0.2, 0.99));
        assert_eq!((c.epochs, c.buffer_capacity, c.minibatches), (8, 40, 4));
        assert_eq!((c.hidden_width, c.hidden_layers), (256, 2));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_clip_is_rejected() {
        for clip in [0.0, 1.0, -0.1] {
            let c = PpoConfig {
                clip,
                ..PpoConfig::default()
            };
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
