//! Experiment configuration: one JSON document, every field overridable from
//! the CLI by its dotted name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::FilterConfig;
use crate::motion::MotionConfig;
use crate::qscore::QScoreConfig;
use crate::sensing::SensorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub map_path: PathBuf,
    pub trajectory_path: PathBuf,
    /// Optional replay log overriding the synthetic sensor.
    pub observation_log: Option<PathBuf>,
    pub n_seeds: u32,
    /// Base master seed; trial k uses seed + k.
    pub seed: u64,
    /// Sigma of the per-seed offset between the true start and the initial
    /// belief mean. Defaults to the initial belief sigma.
    pub init_offset_sigma: f64,
    pub filter: FilterConfig,
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub qscore: QScoreConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map_path: PathBuf::from("maps/table1.json"),
            trajectory_path: PathBuf::from("trajectories/traj2_analog.csv"),
            observation_log: None,
            n_seeds: 25,
            seed: 0,
            init_offset_sigma: 3.0,
            filter: FilterConfig::default(),
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            qscore: QScoreConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_seeds < 1 {
            return Err(ConfigError::Invalid("n_seeds must be >= 1".into()));
        }
        if !self.map_path.exists() {
            return Err(ConfigError::MissingFile(self.map_path.clone()));
        }
        if !self.trajectory_path.exists() {
            return Err(ConfigError::MissingFile(self.trajectory_path.clone()));
        }
        if let Some(log) = &self.observation_log {
            if !log.exists() {
                return Err(ConfigError::MissingFile(log.clone()));
            }
        }
        self.filter
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Switch all noise, detection loss, and false positives off.
    pub fn perfect(mut self) -> Self {
        self.motion.drift_fraction = 0.0;
        self.motion.heading_noise_sigma = 0.0;
        self.sensor = self.sensor.perfect();
        self
    }
}
