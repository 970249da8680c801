//! Pipeline configuration file (TOML). Every field has a default, so an
//! empty file is a valid configuration; unknown keys are rejected.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btm::BtmConfig;
use crate::labeler::{validate_threshold, DEFAULT_THRESHOLD};
use crate::report::CategoryWeights;
use crate::rulegen::RuleGenConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub comments: PathBuf,
    pub policies: PathBuf,
    pub apps: PathBuf,
    pub model: PathBuf,
    pub labeling: PathBuf,
    pub candidates: PathBuf,
    pub triage_dir: PathBuf,
    pub labeled: PathBuf,
    pub rules: PathBuf,
    pub matches: PathBuf,
    pub report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        let out = PathBuf::from("out");
        PathsConfig {
            comments: PathBuf::from("data/comments.jsonl"),
            policies: PathBuf::from("data/policies.jsonl"),
            apps: PathBuf::from("data/apps.jsonl"),
            model: out.join("btm.model"),
            labeling: out.join("labeling.json"),
            candidates: out.join("candidates.jsonl"),
            triage_dir: out.join("triage"),
            labeled: out.join("labeled.json"),
            rules: out.join("rules.jsonl"),
            matches: out.join("matches.jsonl"),
            report: out.join("report.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtmSection {
    /// Defaults to the number of policy documents in the language.
    pub k: Option<usize>,
    /// Defaults to `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BtmSection {
    fn default() -> Self {
        let d = BtmConfig::default();
        BtmSection {
            k: None,
            alpha: None,
            beta: d.beta,
            iterations: d.iterations,
            seed: d.seed,
        }
    }
}

impl BtmSection {
    pub fn resolve(&self, policy_docs: usize) -> BtmConfig {
        BtmConfig {
            k: self.k.unwrap_or(policy_docs),
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingSection {
    pub threshold: f64,
}

impl Default for LabelingSection {
    fn default() -> Self {
        LabelingSection {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub weights: CategoryWeights,
    pub exclude_blank: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriageSection {
    pub port: u16,
    /// Pins every triage timestamp, for reproducible logs.
    pub fixed_time: Option<DateTime<Utc>>,
}

impl Default for TriageSection {
    fn default() -> Self {
        TriageSection {
            port: 8377,
            fixed_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub lang: String,
    pub paths: PathsConfig,
    pub btm: BtmSection,
    pub labeling: LabelingSection,
    pub rules: RuleGenConfig,
    pub report: ReportSection,
    pub triage: TriageSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lang: "en".to_string(),
            paths: PathsConfig::default(),
            btm: BtmSection::default(),
            labeling: LabelingSection::default(),
            rules: RuleGenConfig::default(),
            report: ReportSection::default(),
            triage: TriageSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(content: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(content)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lang.trim().is_empty() {
            return Err(ConfigError::Invalid("lang must not be empty".into()));
        }
        if self.btm.k == Some(0) {
            return Err(ConfigError::Invalid("btm.k must be at least 1".into()));
        }
        self.btm
            .resolve(1)
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("btm: {e}")))?;
        validate_threshold(self.labeling.threshold)
            .map_err(|e| ConfigError::Invalid(format!("labeling: {e}")))?;
        self.rules
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("rules: {e}")))?;
        self.report
            .weights
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("report: {e}")))?;
        Ok(())
    }
}
