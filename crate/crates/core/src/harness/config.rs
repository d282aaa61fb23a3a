use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::discovery::DEFAULT_THRESHOLD;
use crate::environment::WorldConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    /// Smallest normalized entropy reduction that admits a parent.
    pub threshold: f64,
    pub lag: usize,
    /// Rows of random interaction to log.
    pub samples: usize,
    /// Rows between restarts from the initial state.
    pub episode_steps: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            threshold: DEFAULT_THRESHOLD,
            lag: 1,
            samples: 10_000,
            episode_steps: 20,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "discovery threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.lag != 1 {
            return Err(Error::ConfigInvalid(format!(
                "discovery lag {} unsupported; the network spans one step",
                self.lag
            )));
        }
        if self.episode_steps == 0 {
            return Err(Error::ConfigInvalid("episode_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a command needs besides the input network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub agent: AgentConfig,
    pub discovery: DiscoveryConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            agent: AgentConfig::default(),
            discovery: DiscoveryConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.agent.validate()?;
        self.discovery.validate()
    }

    /// Parses a JSON document; absent fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The same experiment with a different seed and output directory
    /// ignored; two configs that agree here produce comparable bundles.
    pub fn comparable(&self, other: &ExperimentConfig) -> bool {
        self.world == other.world && self.agent == other.agent && self.discovery == other.discovery
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"sead": 3}"#),
            Err(Error::ConfigInvalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"agent": {"alpha": 1.5}}"#),
            Err(Error::ConfigInvalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"discovery": {"lag": 2}}"#),
            Err(Error::ConfigInvalid(_))
        ));
    }
}
