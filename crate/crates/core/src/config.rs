//! Application configuration, loaded from a JSON file. Every field has a
//! default, so `{}` is a valid config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::DEFAULT_TAU;
use crate::corpus::SourceFormat;
use crate::embedding::EmbedderSpec;
use crate::ranking::RankWeights;
use crate::sentiment::FusionConfig;
use crate::summarizer::SummarizerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path} is not valid JSON: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "Io",
            ConfigError::Parse { .. } => "InvalidConfig",
            ConfigError::Invalid(_) => "InvalidConfig",
        }
    }
}

/// Optional overrides for the bundled lexicon and catalog files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourcePaths {
    pub stopwords: Option<PathBuf>,
    /// English word list used by the optional vocabulary filter.
    pub wordlist: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub negations: Option<PathBuf>,
    pub aspect_catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Environment variable holding the admin token for report access.
    pub admin_token_env: String,
    /// Allowed browser origin; `*` allows any.
    pub cors_origin: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            admin_token_env: "REVRANK_ADMIN_TOKEN".into(),
            cors_origin: "*".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Salt mixed into participant email hashes.
    pub email_salt: String,
    /// Minimum number of aspects selected per category.
    pub min_preferences: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { email_salt: "revrank-study".into(), min_preferences: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub data_dir: PathBuf,
    /// Review corpus served by the API and used by batch commands. The
    /// bundled demo corpus is used when unset.
    pub corpus_path: Option<PathBuf>,
    pub corpus_format: SourceFormat,
    pub resources: ResourcePaths,
    pub embedder: EmbedderSpec,
    pub fusion: FusionConfig,
    pub weights: RankWeights,
    pub tau: f64,
    /// Drop tokens missing from the English word list during cleaning.
    pub filter_english: bool,
    pub summarizer: SummarizerConfig,
    pub server: ServerConfig,
    pub study: StudyConfig,
    pub seed: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            data_dir: PathBuf::from("revrank-data"),
            corpus_path: None,
            corpus_format: SourceFormat::Tsv,
            resources: ResourcePaths::default(),
            embedder: EmbedderSpec::default(),
            fusion: FusionConfig::default(),
            weights: RankWeights::default(),
            tau: DEFAULT_TAU,
            filter_english: true,
            summarizer: SummarizerConfig::default(),
            server: ServerConfig::default(),
            study: StudyConfig::default(),
            seed: 42,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg: AppConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.weights.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.fusion.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.embedder.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.summarizer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::Invalid(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.study.min_preferences == 0 {
            return Err(ConfigError::Invalid("study.min_preferences must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks that the data directory exists (creating it if needed) and
    /// accepts writes.
    pub fn ensure_data_dir(&self) -> Result<(), ConfigError> {
        let io = |source| ConfigError::Io { path: self.data_dir.clone(), source };
        fs::create_dir_all(&self.data_dir).map_err(io)?;
        let probe = self.data_dir.join(".write-probe");
        fs::write(&probe, b"").map_err(io)?;
        fs::remove_file(&probe).map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg: AppConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, AppConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.weights.w1, 0.6);
        assert_eq!(cfg.weights.w2, 0.4);
        assert_eq!(cfg.fusion.alpha, 0.5);
        assert_eq!(cfg.tau, 0.25);
    }

    #[test]
    fn partial_override() {
        let cfg: AppConfig = serde_json::from_str(r#"{"seed": 7, "weights": {"w1": 0.5, "w2": 0.5}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.weights.w1, 0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let cfg: AppConfig = serde_json::from_str(r#"{"weights": {"w1": 0.7, "w2": 0.4}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: AppConfig = serde_json::from_str(r#"{"tau": 1.5}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let cfg = AppConfig { data_dir: dir.path().join("data"), ..AppConfig::default() };
        fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        assert_eq!(AppConfig::load(&path).unwrap(), cfg);
        cfg.ensure_data_dir().unwrap();
        assert!(cfg.data_dir.is_dir());
        assert_eq!(AppConfig::load(&dir.path().join("missing.json")).unwrap_err().code(), "Io");
    }
}
