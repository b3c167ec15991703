use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::baselines::{CalibrationConfig, IdmBounds, IdmParams};
use crate::classifier::RuleConfig;
use crate::env::EnvConfig;
use crate::regressor::TrainConfig;
use crate::sac::{AgentHyperparams, CurriculumSchedule};
use crate::style::DrivingStyle;
use crate::trajectory::{FilterConfig, SyntheticConfig};

pub const OUTPUT_DIR_ENV: &str = "AA_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory scanned for recorded trajectory files.
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/models`.
    pub model_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            model_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleSelection {
    Aggressive,
    Normal,
    Conservative,
    All,
}

impl StyleSelection {
    pub fn styles(self) -> Vec<DrivingStyle> {
        match self {
            Self::Aggressive => vec![DrivingStyle::Aggressive],
            Self::Normal => vec![DrivingStyle::Normal],
            Self::Conservative => vec![DrivingStyle::Conservative],
            Self::All => DrivingStyle::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for StyleSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "aggressive" => Ok(Self::Aggressive),
            "normal" => Ok(Self::Normal),
            "conservative" => Ok(Self::Conservative),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown style `{s}` (aggressive, normal, conservative, all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Synthetic episodes per selected style; 0 reads `data_dir`.
    pub synthetic: usize,
    pub synthetic_duration: f64,
    pub generator: SyntheticConfig,
    pub filter: FilterConfig,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            synthetic: 0,
            synthetic_duration: 20.0,
            generator: SyntheticConfig::default(),
            filter: FilterConfig::default(),
        }
    }
}

/// Optional overrides applied on top of the per-style regressor defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSection {
    pub max_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub patience: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
}

impl RegressorSection {
    pub fn resolve(&self, style: DrivingStyle, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::for_style(style);
        if let Some(v) = self.max_epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.patience {
            c.patience = v;
        }
        if let Some(v) = &self.hidden {
            c.dropout = (0..v.len()).map(|i| c.dropout.get(i).copied().unwrap_or(0.0)).collect();
            c.hidden = v.clone();
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        c.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmSection {
    /// Starting point of the calibration and the uncalibrated baseline.
    pub reference: IdmParams,
    pub bounds: IdmBounds,
    pub calibration: CalibrationConfig,
}

impl Default for IdmSection {
    fn default() -> Self {
        Self {
            reference: IdmParams::default(),
            bounds: IdmBounds::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

/// How agent episodes are drawn from the per-style episode store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub hyperparams: AgentHyperparams,
    pub curriculum: CurriculumSchedule,
    pub pool_size: usize,
    /// Traces used for checkpoint selection during training.
    pub selection_size: usize,
    /// Traces reserved for `evaluate`.
    pub eval_size: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            hyperparams: AgentHyperparams::default(),
            curriculum: CurriculumSchedule::default(),
            pool_size: 10,
            selection_size: 5,
            eval_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub style: StyleSelection,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub classify: RuleConfig,
    pub regressor: RegressorSection,
    pub idm: IdmSection,
    pub env: EnvConfig,
    pub agent: AgentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            style: StyleSelection::All,
            paths: Paths::default(),
            ingest: IngestSection::default(),
            classify: RuleConfig::default(),
            regressor: RegressorSection::default(),
            idm: IdmSection::default(),
            env: EnvConfig::default(),
            agent: AgentSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file, then applies the output-directory override.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut c = Self::from_toml(&text)?;
        c.apply_env();
        Ok(c)
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.paths.output_dir = PathBuf::from(dir);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved settings. Paths
    /// are excluded so relocating a run keeps its hash.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_dir(&self) -> PathBuf {
        self.paths.model_dir.clone().unwrap_or_else(|| self.paths.output_dir.join("models"))
    }

    /// Agent settings with the run seed applied.
    pub fn agent_hyperparams(&self) -> AgentHyperparams {
        AgentHyperparams {
            seed: self.seed,
            ..self.agent.hyperparams.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.classify.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.env.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.agent_hyperparams().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.ingest.synthetic_duration <= 0.0 {
            return Err(HarnessError::Config("ingest.synthetic_duration must be positive".into()));
        }
        if self.agent.pool_size == 0 {
            return Err(HarnessError::Config("agent.pool_size must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_hash(), c.config_hash());
        assert_eq!(c.config_hash().len(), 16);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml("seed = 7\nstyle = \"normal\"\n[agent]\npool_size = 3\n[agent.curriculum]\nepisodes = 50\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.style, StyleSelection::Normal);
        assert_eq!(c.agent.pool_size, 3);
        assert_eq!(c.agent.curriculum.episodes, 50);
        assert_eq!(c.agent.curriculum.switch_episode, 500);
        assert!(RunConfig::from_toml("seed = \"x\"").is_err());
        assert!(RunConfig::from_toml("unknown_top = 1").is_err());
    }

    #[test]
    fn hash_tracks_settings_not_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.output_dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed += 1;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn regressor_overrides() {
        let s = RegressorSection {
            max_epochs: Some(3),
            hidden: Some(vec![16]),
            ..Default::default()
        };
        let c = s.resolve(DrivingStyle::Normal, 9);
        assert_eq!((c.max_epochs, c.hidden.clone(), c.dropout.len(), c.seed), (3, vec![16], 1, 9));
        assert!(c.validate().is_ok());
    }
}
