//! Pipeline configuration: TOML file with flag overrides on top.
//!
//! Precedence is flags > file > defaults.

use std::path::{Path, PathBuf};

use emsaudit_core::tagger::Hyperparams;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("referenced path does not exist: {0}")]
    MissingPath(PathBuf),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    #[serde(default)]
    gen: GenSection,
    #[serde(default)]
    split: SplitSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    paths: PathsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenSection {
    n_documents: Option<usize>,
    misspelling_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitSection {
    fractions: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    embed_dim: Option<usize>,
    hidden_dim: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    patience: Option<usize>,
    max_epochs: Option<usize>,
    min_token_count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    gazetteer: Option<PathBuf>,
    rules: Option<PathBuf>,
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub n_documents: usize,
    pub misspelling_rate: f64,
    pub fractions: [f64; 3],
    pub hyperparams: Hyperparams,
    pub gazetteer_path: Option<PathBuf>,
    pub rules_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: crate::DEFAULT_SEED,
            out_dir: PathBuf::from("runs/pipeline"),
            n_documents: 2000,
            misspelling_rate: 0.05,
            fractions: [0.95, 0.025, 0.025],
            hyperparams: Hyperparams {
                seed: crate::DEFAULT_SEED,
                ..Hyperparams::default()
            },
            gazetteer_path: None,
            rules_path: None,
        }
    }
}

impl PipelineConfig {
    /// Defaults overlaid with a config file, if given.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let Some(path) = path else { return Ok(cfg) };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: FileConfig = toml::from_str(&text)?;
        if let Some(seed) = file.seed {
            cfg.set_seed(seed);
        }
        if let Some(out_dir) = file.out_dir {
            cfg.out_dir = out_dir;
        }
        if let Some(n) = file.gen.n_documents {
            cfg.n_documents = n;
        }
        if let Some(rate) = file.gen.misspelling_rate {
            cfg.misspelling_rate = rate;
        }
        if let Some(fractions) = file.split.fractions {
            cfg.fractions = fractions;
        }
        let hp = &mut cfg.hyperparams;
        let t = &file.train;
        hp.embed_dim = t.embed_dim.unwrap_or(hp.embed_dim);
        hp.hidden_dim = t.hidden_dim.unwrap_or(hp.hidden_dim);
        hp.batch_size = t.batch_size.unwrap_or(hp.batch_size);
        hp.learning_rate = t.learning_rate.unwrap_or(hp.learning_rate);
        hp.patience = t.patience.unwrap_or(hp.patience);
        hp.max_epochs = t.max_epochs.unwrap_or(hp.max_epochs);
        hp.min_token_count = t.min_token_count.unwrap_or(hp.min_token_count);
        cfg.gazetteer_path = file.paths.gazetteer;
        cfg.rules_path = file.paths.rules;
        Ok(cfg)
    }

    /// One seed feeds every stochastic stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.hyperparams.seed = seed;
    }

    /// Fail fast if configured paths do not exist.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        for path in [&self.gazetteer_path, &self.rules_path].into_iter().flatten() {
            if !path.exists() {
                return Err(ConfigError::MissingPath(path.clone()));
            }
        }
        Ok(())
    }
}
