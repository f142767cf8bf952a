//! Experiment configuration: built-in profiles plus TOML overrides.
//!
//! A config file holds top-level keys and the `[env]`, `[env.channel]`,
//! `[ppo]` and `[dqn]` sections. Whatever it sets is merged over the chosen
//! profile; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::DqnConfig;
use crate::mfhppo::{EntropyMode, PpoConfig};
use crate::mmdp::EnvConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mfhppo,
    Rstd,
    Namas,
    Madqn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mfhppo => "mfhppo",
            Algorithm::Rstd => "rstd",
            Algorithm::Namas => "namas",
            Algorithm::Madqn => "madqn",
        }
    }

    /// Policies that do not learn; their cost is averaged over every episode.
    pub fn is_stationary(self) -> bool {
        matches!(self, Algorithm::Rstd | Algorithm::Namas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-size scenario with the reference hyperparameters.
    Paper,
    /// Three UAVs and twelve sensors, sized to train in under a minute per seed.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    /// Episodes per seed.
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Comparison runs reported in the summary.
    pub baselines: Vec<Algorithm>,
    /// Episodes in the final window and in the moving average.
    pub window: usize,
    /// Radius for the max-AoI baseline; global when unset.
    pub namas_radius: Option<f64>,
    /// Fill `wall_ms` with measured time. Off by default so that output
    /// files depend only on config and seed.
    pub record_wall_time: bool,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub dqn: DqnConfig,
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => ExperimentConfig {
                algorithm: Algorithm::Mfhppo,
                episodes: 3000,
                seeds: vec![0, 1, 2],
                baselines: vec![Algorithm::Rstd, Algorithm::Namas],
                window: 50,
                namas_radius: None,
                record_wall_time: false,
                env: EnvConfig::default(),
                ppo: PpoConfig::default(),
                dqn: DqnConfig::default(),
            },
            Profile::Desk => ExperimentConfig {
                algorithm: Algorithm::Mfhppo,
                episodes: 300,
                seeds: vec![0, 1, 2],
                baselines: vec![Algorithm::Rstd, Algorithm::Namas],
                window: 50,
                namas_radius: None,
                record_wall_time: false,
                env: EnvConfig {
                    num_uavs: 3,
                    num_sensors: 12,
                    area_width: 200.0,
                    area_height: 200.0,
                    aoi_scale: Some(10.0),
                    ..EnvConfig::default()
                },
                ppo: PpoConfig {
                    learning_rate: 1e-3,
                    gamma: 0.5,
                    entropy_coef: 0.01,
                    entropy_mode: EntropyMode::Sum,
                    hidden_width: 64,
                    lstm_hidden: Some(32),
                    share_parameters: false,
                    reward_scale: 0.05,
                    ..PpoConfig::default()
                },
                dqn: DqnConfig {
                    hidden_width: 64,
                    epsilon_decay_episodes: 200,
                    ..DqnConfig::default()
                },
            },
        }
    }

    /// The profile with `text` (TOML) merged over it.
    pub fn from_toml(profile: Profile, text: &str, origin: &Path) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text).map_err(|e| toml_error(origin, text, &e))?;
        let mut merged = toml::Table::try_from(Self::profile(profile))
            .map_err(|e| Error::Config(format!("cannot encode profile: {e}")))?;
        merge(&mut merged, overrides);
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse {
            path: origin.to_path_buf(),
            line: key_line(text, e.message()),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(profile: Profile, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(profile, &text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.episodes == 0 || self.window == 0 {
            return Err(Error::Config("episodes and window must be at least 1".into()));
        }
        if let Some(r) = self.namas_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("namas_radius must be positive, got {r}")));
            }
        }
        self.env.validate()?;
        self.ppo.validate()?;
        self.dqn.validate(&self.env)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode config: {e}")))
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Line of the first assignment to the key quoted in a schema error, 0 if none.
fn key_line(text: &str, message: &str) -> u64 {
    let Some(key) = message.split('`').nth(1) else {
        return 0;
    };
    text.lines()
        .position(|l| l.split('=').next().is_some_and(|k| k.trim() == key) && l.contains('='))
        .map_or(0, |i| i as u64 + 1)
}

fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
        .unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.message().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(Profile::Desk, text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_yields_profile() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::profile(Profile::Desk));
    }

    #[test]
    fn both_profiles_validate() {
        ExperimentConfig::profile(Profile::Paper).validate().unwrap();
        ExperimentConfig::profile(Profile::Desk).validate().unwrap();
    }

    #[test]
    fn overrides_merge_into_sections() {
        let c = parse("episodes = 7\n[ppo]\nclip = 0.3\nlstm_enabled = false\n[env.channel]\nloss_threshold = 90.0\n").unwrap();
        let desk = ExperimentConfig::profile(Profile::Desk);
        assert_eq!(c.episodes, 7);
        assert_eq!(c.ppo.clip, 0.3);
        assert!(!c.ppo.lstm_enabled);
        assert_eq!(c.ppo.learning_rate, desk.ppo.learning_rate);
        assert_eq!(c.env.channel.loss_threshold, 90.0);
        assert_eq!(c.env.channel.a, desk.env.channel.a);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(parse("[ppo]\nclpi = 0.3\n"), Err(Error::Parse { .. })));
        match parse("episodes = 3\n[ppo]\nclip = 0.3\nclpi = 0.3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        match parse("episodes = 3\n\n[ppo\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_seed_list_is_a_config_error() {
        assert!(matches!(parse("seeds = []\n"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_overrides_are_rejected() {
        assert!(matches!(parse("[ppo]\nclip = 1.5\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[env]\nnum_uavs = 0\n"), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::profile(Profile::Paper);
        let back = ExperimentConfig::from_toml(Profile::Paper, &c.to_toml().unwrap(), Path::new("x.toml")).unwrap();
        assert_eq!(back, c);
    }
}
