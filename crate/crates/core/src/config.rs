//! Run configuration loaded from TOML; every key is optional and command-line
//! flags take precedence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::acquisition::{RetryPolicy, SelectionPolicy, DEFAULT_MATCH_RADIUS_M, DEFAULT_RATE_LIMIT_PER_S};
use crate::error::{Error, Result};
use crate::glare::{GlareCriteria, DEFAULT_STEP_S};
use crate::time::Zone;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// `UTC`, `+HH:MM` or an IANA zone name.
    pub zone: Option<String>,
    pub step_s: Option<f64>,
    pub threshold_deg: Option<f64>,
    pub min_elevation_deg: Option<f64>,
    pub spacing_m: Option<f64>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub rate_limit_per_s: Option<f64>,
    pub max_attempts: Option<u32>,
    pub retry_budget: Option<u32>,
    pub base_delay_ms: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub api_key: Option<String>,
    pub metadata_url: Option<String>,
    pub tile_url: Option<String>,
    pub match_radius_m: Option<f64>,
    pub policy: Option<String>,
    pub zoom: Option<u32>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn zone(&self) -> Result<Zone> {
        self.zone.as_deref().map_or(Ok(Zone::utc()), str::parse)
    }

    pub fn step_s(&self) -> f64 {
        self.step_s.unwrap_or(DEFAULT_STEP_S)
    }

    pub fn criteria(&self) -> Result<GlareCriteria> {
        let d = GlareCriteria::default();
        let c = GlareCriteria {
            threshold_deg: self.threshold_deg.unwrap_or(d.threshold_deg),
            min_elevation_deg: self.min_elevation_deg.unwrap_or(d.min_elevation_deg),
        };
        c.validate()?;
        Ok(c)
    }
}

impl AcquisitionConfig {
    pub fn rate_limit_per_s(&self) -> f64 {
        self.rate_limit_per_s.unwrap_or(DEFAULT_RATE_LIMIT_PER_S)
    }

    pub fn retry(&self) -> RetryPolicy {
        let d = RetryPolicy::default();
        RetryPolicy {
            max_attempts: self.max_attempts.unwrap_or(d.max_attempts),
            budget: self.retry_budget.unwrap_or(d.budget),
            base_delay: self.base_delay_ms.map_or(d.base_delay, Duration::from_millis),
            ..d
        }
    }

    pub fn match_radius_m(&self) -> f64 {
        self.match_radius_m.unwrap_or(DEFAULT_MATCH_RADIUS_M)
    }

    pub fn policy(&self) -> Result<SelectionPolicy> {
        self.policy
            .as_deref()
            .map_or(Ok(SelectionPolicy::default()), str::parse)
    }
}
