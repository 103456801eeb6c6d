//! Run configuration file.

use std::path::{Path, PathBuf};

use neuroevo::evolution::EvolutionConfig;
use neuroevo::tasks::{
    load_manifest, BarsTask, FitnessTask, ImageClassificationTask, TaskError, XorTask,
    DEFAULT_BAR_NOISE,
};
use serde::Deserialize;

/// Top-level TOML document.
///
/// ```toml
/// [evolution]
/// population_size = 150
/// seed = 7
///
/// [evolution.compatibility]
/// threshold = 3.0
///
/// [task.bars]
/// size = 16
/// ```
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    pub task: TaskSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSettings {
    pub bars: BarsSettings,
    pub images: ImageSettings,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarsSettings {
    pub size: usize,
    pub samples_per_class: usize,
    pub noise: f64,
}

impl Default for BarsSettings {
    fn default() -> Self {
        BarsSettings {
            size: 16,
            samples_per_class: 40,
            noise: DEFAULT_BAR_NOISE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSettings {
    pub width: usize,
    pub height: usize,
}

impl Default for ImageSettings {
    fn default() -> Self {
        ImageSettings {
            width: 32,
            height: 32,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: invalid evolution settings: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        config
            .evolution
            .validate()
            .map_err(|message| ConfigError::Invalid {
                path: path.to_path_buf(),
                message,
            })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }
}

/// Task named on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskSelector {
    Xor,
    Bars,
    Images(PathBuf),
}

impl std::str::FromStr for TaskSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "xor" => Ok(TaskSelector::Xor),
            "bars" => Ok(TaskSelector::Bars),
            _ => match s.strip_prefix("images:") {
                Some(path) if !path.is_empty() => Ok(TaskSelector::Images(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown task `{s}`; expected xor, bars or images:<manifest>"
                )),
            },
        }
    }
}

impl TaskSelector {
    /// Build the task. The bars dataset is drawn from the run seed.
    pub fn build(&self, config: &RunConfig) -> Result<Box<dyn FitnessTask>, TaskError> {
        Ok(match self {
            TaskSelector::Xor => Box::new(XorTask::new()),
            TaskSelector::Bars => {
                let b = &config.task.bars;
                Box::new(BarsTask::with_noise(
                    b.size,
                    b.samples_per_class,
                    config.evolution.seed,
                    b.noise,
                )?)
            }
            TaskSelector::Images(manifest) => {
                let manifest = load_manifest(manifest)?;
                let i = &config.task.images;
                Box::new(ImageClassificationTask::new(&manifest, i.width, i.height)?)
            }
        })
    }
}
