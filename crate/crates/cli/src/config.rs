//! Pipeline configuration: defaults, optional TOML file, flag overrides.
//!
//! Precedence is flag > config file > built-in default. The built-in
//! thresholds are the ones the whole pipeline is calibrated around:
//! annotator vote threshold 2 (of 3), keyword vote threshold 3 (of 5),
//! attribution threshold 0.1, candidate hate level 5, keyword frequency 10.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use maskeval::metrics::Aggregation;

use crate::CliError;

/// Environment variable holding a default config file path.
pub const CONFIG_ENV_VAR: &str = "MASKEVAL_CONFIG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    aggregation: Option<String>,
    #[serde(default)]
    paths: FilePaths,
    #[serde(default)]
    thresholds: FileThresholds,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePaths {
    corpus: Option<PathBuf>,
    verdicts: Option<PathBuf>,
    candidates: Option<PathBuf>,
    attributions: Option<PathBuf>,
    overrides: Option<PathBuf>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileThresholds {
    annotator_votes: Option<u8>,
    keyword_votes: Option<usize>,
    attribution: Option<f64>,
    min_level: Option<u8>,
    min_count: Option<usize>,
}

/// Fully resolved configuration for one invocation.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub attributions: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub output: PathBuf,

    pub annotator_votes: u8,
    pub keyword_votes: usize,
    pub attribution: f64,
    pub min_level: u8,
    pub min_count: usize,

    pub seed: u64,
    pub aggregation: Aggregation,
    pub redact: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            verdicts: None,
            candidates: None,
            attributions: None,
            overrides: None,
            output: PathBuf::from("out"),
            annotator_votes: 2,
            keyword_votes: 3,
            attribution: 0.1,
            min_level: 5,
            min_count: 10,
            seed: 0,
            aggregation: Aggregation::Micro,
            redact: false,
        }
    }
}

impl PipelineConfig {
    /// Layer a TOML config file over the defaults.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let file: FileConfig = toml::from_str(&contents)
            .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))?;

        let defaults = Self::default();
        let aggregation = match file.aggregation {
            Some(s) => Aggregation::parse(&s)
                .ok_or_else(|| CliError::Validation(format!("unknown aggregation {s:?}")))?,
            None => defaults.aggregation,
        };
        Ok(Self {
            corpus: file.paths.corpus,
            verdicts: file.paths.verdicts,
            candidates: file.paths.candidates,
            attributions: file.paths.attributions,
            overrides: file.paths.overrides,
            output: file.paths.output.unwrap_or(defaults.output),
            annotator_votes: file
                .thresholds
                .annotator_votes
                .unwrap_or(defaults.annotator_votes),
            keyword_votes: file
                .thresholds
                .keyword_votes
                .unwrap_or(defaults.keyword_votes),
            attribution: file.thresholds.attribution.unwrap_or(defaults.attribution),
            min_level: file.thresholds.min_level.unwrap_or(defaults.min_level),
            min_count: file.thresholds.min_count.unwrap_or(defaults.min_count),
            seed: file.seed.unwrap_or(defaults.seed),
            aggregation,
            redact: defaults.redact,
        })
    }

    /// Range-check every threshold.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=3).contains(&self.annotator_votes) {
            return Err(CliError::Validation(format!(
                "annotator_votes {} outside 1..=3",
                self.annotator_votes
            )));
        }
        if self.keyword_votes > 5 {
            return Err(CliError::Validation(format!(
                "keyword_votes {} outside 0..=5",
                self.keyword_votes
            )));
        }
        if !self.attribution.is_finite() || !(0.0..=1.0).contains(&self.attribution) {
            return Err(CliError::Validation(format!(
                "attribution threshold {} outside 0..=1",
                self.attribution
            )));
        }
        if self.min_level > 5 {
            return Err(CliError::Validation(format!(
                "min_level {} outside 0..=5",
                self.min_level
            )));
        }
        if self.min_count == 0 {
            return Err(CliError::Validation(
                "min_count must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// One-line provenance summary printed at startup.
    pub fn provenance_line(&self) -> String {
        format!(
            "config: annotator_votes={} keyword_votes={} attribution={} min_level={} min_count={} seed={} aggregation={} redact={}",
            self.annotator_votes,
            self.keyword_votes,
            self.attribution,
            self.min_level,
            self.min_count,
            self.seed,
            match self.aggregation {
                Aggregation::Micro => "micro",
                Aggregation::Macro => "macro",
            },
            self.redact,
        )
    }
}
