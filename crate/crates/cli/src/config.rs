//! JSON run configuration. Every section is optional and falls back to
//! the channel-one defaults; command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skyphase_core::atmosphere::ChannelConfig;
use skyphase_core::dataset::CampaignSettings;
use skyphase_core::qkd::DetectorParams;
use skyphase_nn::NetworkSpec;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    PaperFaithful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Shuffle seed.
    pub seed: u64,
    pub init_seed: u64,
    pub preset: Preset,
    /// Channel widths of the three encoder stages.
    pub widths: [usize; 3],
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            init_seed: 0,
            preset: Preset::PaperFaithful,
            widths: [8, 16, 32],
        }
    }
}

impl TrainingConfig {
    pub fn network_spec(&self, h: usize, w: usize) -> NetworkSpec {
        match self.preset {
            Preset::PaperFaithful => NetworkSpec::paper_faithful(h, w, self.widths),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.epochs == 0 {
            return Err(CliError::config("invalid configuration: `training.epochs` must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(CliError::config("invalid configuration: `training.batch_size` must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(CliError::config("invalid configuration: `training.learning_rate` must be >= 0"));
        }
        if self.widths.contains(&0) {
            return Err(CliError::config("invalid configuration: `training.widths` must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub channel: ChannelConfig,
    pub detector: DetectorParams,
    pub campaign: CampaignSettings,
    pub training: TrainingConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid configuration in {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Re-checks every module-level invariant.
    pub fn validate(&self) -> CliResult<()> {
        self.channel.validate()?;
        self.detector.validate()?;
        self.campaign.validate()?;
        self.training.validate()?;
        if let Some(dir) = &self.paths.data_dir {
            if dir.exists() && !dir.is_dir() {
                return Err(CliError::config(format!(
                    "invalid configuration: `paths.data_dir` {} is not a directory",
                    dir.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn channel_fields_use_table_names() {
        let json = serde_json::to_value(RunConfig::default()).unwrap();
        assert_eq!(json["channel"]["satellite_altitude_H"], 300e3);
        assert_eq!(json["detector"]["beta_reconciliation"], 0.95);
        assert_eq!(json["training"]["preset"], "paper_faithful");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"chanel": {}}"#).is_err());
    }
}
