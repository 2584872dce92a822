//! Experiment configuration files.
//!
//! A configuration is one JSON object. Every field except `seed` may be
//! omitted when the chosen subcommand does not need it; `seed` may also be
//! supplied on the command line.

use std::fs;
use std::path::{Path, PathBuf};

use dipcoal::ancestry::{CoupleSource, StartLayout};
use dipcoal::forward_models::{ModelConfig, ModelError};
use dipcoal::xi_rates::XiMeasure;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, located by a dotted field path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

/// A measure given either inline (`"beta:k=4:alpha=1.5"`) or as an object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Inline(String),
    Full(XiMeasure),
}

impl MeasureSpec {
    pub fn resolve(&self) -> Result<XiMeasure, ConfigError> {
        match self {
            MeasureSpec::Inline(s) => s.parse().map_err(|e: dipcoal::xi_rates::RateError| ConfigError::new("measure", e.to_string())),
            MeasureSpec::Full(m) => Ok(m.clone()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// Sample size `n`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Population sizes for scans over `N`.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub replicates: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Test level.
    #[serde(default)]
    pub level: Option<f64>,
    /// Largest block count for rate tables.
    #[serde(default)]
    pub max_b: Option<usize>,
    #[serde(default)]
    pub source: CoupleSource,
    #[serde(default)]
    pub start: StartLayout,
}

fn model_error(e: ModelError) -> ConfigError {
    match e {
        ModelError::Invalid { field, message } => ConfigError::new(format!("model.{field}"), message),
        other => ConfigError::new("model", other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "config".to_string() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every sub-configuration that is present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(m) = &self.model {
            m.validate().map_err(model_error)?;
        }
        if let Some(m) = &self.measure {
            m.resolve()?;
        }
        if let Some(l) = self.level {
            if !(l > 0.0 && l < 1.0) {
                return Err(ConfigError::new("level", format!("{l} outside the open interval (0,1)")));
            }
        }
        if self.n.is_some_and(|n| n < 2) {
            return Err(ConfigError::new("n", "sample size must be at least 2"));
        }
        if self.replicates == Some(0) {
            return Err(ConfigError::new("replicates", "must be positive"));
        }
        for (i, &n) in self.n_grid.iter().enumerate() {
            if let Some(m) = &self.model {
                m.with_n_pop(n).validate().map_err(|e| ConfigError::new(format!("n_grid[{i}]"), e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::new("seed", "missing; pass --seed or set it in the config"))
    }

    pub fn require_model(&self) -> Result<&ModelConfig, ConfigError> {
        self.model.as_ref().ok_or_else(|| ConfigError::new("model", "missing"))
    }

    pub fn require_measure(&self) -> Result<XiMeasure, ConfigError> {
        self.measure.as_ref().ok_or_else(|| ConfigError::new("measure", "missing"))?.resolve()
    }

    pub fn require_n(&self) -> Result<usize, ConfigError> {
        self.n.ok_or_else(|| ConfigError::new("n", "missing"))
    }

    pub fn require_replicates(&self) -> Result<u64, ConfigError> {
        self.replicates.ok_or_else(|| ConfigError::new("replicates", "missing; pass --reps or set it in the config"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"x","model":{"model":"wright_fisher","n_pop":100},"n":4,
                "replicates":10,"seed":7,"measure":"beta:k=4:alpha=1.5","level":0.01}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.require_measure().unwrap(), XiMeasure::beta(4, 1.5).unwrap());
    }

    #[test]
    fn measure_object_form() {
        let cfg = ExperimentConfig::from_json(r#"{"seed":1,"measure":{"kingman_mass":1.0,"normalized":true}}"#).unwrap();
        assert_eq!(cfg.require_measure().unwrap(), XiMeasure::kingman());
    }

    #[test]
    fn invalid_alpha_names_domain() {
        let e = ExperimentConfig::from_json(
            r#"{"seed":1,"model":{"model":"random_fitness","n_pop":100,"fitness":{"law":"pareto","alpha":2.0,"x_min":1.0}}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "model.fitness.alpha");
        assert!(e.message.contains("(1,2)"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"seed":1,"measure":"beta:k=2:alpha=2.0"}"#).unwrap_err();
        assert!(e.to_string().contains("(1,2)"), "{e}");
    }

    #[test]
    fn unknown_field_has_path() {
        let e = ExperimentConfig::from_json(r#"{"seed":1,"model":{"model":"wright_fisher","n_pop":10,"bogus":1}}"#).unwrap_err();
        assert!(e.path.starts_with("model"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"seed":"x"}"#).unwrap_err();
        assert_eq!(e.path, "seed");
    }

    #[test]
    fn seed_is_mandatory() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg.require_seed().unwrap_err().path, "seed");
    }
}
