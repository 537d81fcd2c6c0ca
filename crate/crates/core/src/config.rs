//! Pipeline configuration: a flat key-value file (TOML syntax, no tables)
//! with defaults for every key. Unknown keys are a hard error so typos
//! cannot silently fall back to defaults. Command-line flags override file
//! values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyMode, ClassifyParams};
use crate::error::{Error, Result};
use crate::segment::OvalCriteria;
use crate::track::TrackParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Stage I intensity window, inclusive.
    pub threshold_lo: u16,
    pub threshold_hi: u16,

    /// Ovalar shape criteria.
    pub area_min: u64,
    pub area_max: u64,
    pub circularity_min: f64,
    pub solidity_min: f64,
    pub eccentricity_max: f64,

    /// Seeding.
    pub seed_area_min: u64,
    pub seed_point: Option<[u32; 2]>,

    /// Propagation.
    pub overlap_min: u64,
    pub gap_tolerance: u32,

    /// Classification.
    pub classify_mode: ClassifyMode,
    pub classify_threshold: Option<f64>,
    pub separability_min: f64,

    /// Overlay rendering window (lo inclusive maps to black, hi to white).
    pub render_lo: u16,
    pub render_hi: u16,

    /// Worker threads for the parallel stages; 0 means the library default.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold_lo: 600,
            threshold_hi: 4000,
            area_min: 20,
            area_max: 10_000,
            circularity_min: 0.40,
            solidity_min: 0.85,
            eccentricity_max: 0.95,
            seed_area_min: 100,
            seed_point: None,
            overlap_min: 1,
            gap_tolerance: 0,
            classify_mode: ClassifyMode::Fixed,
            classify_threshold: None,
            separability_min: 0.5,
            render_lo: 0,
            render_hi: 2000,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.threshold_lo > self.threshold_hi {
            return invalid(format!(
                "threshold_lo ({}) exceeds threshold_hi ({})",
                self.threshold_lo, self.threshold_hi
            ));
        }
        if self.render_lo >= self.render_hi {
            return invalid(format!(
                "render_lo ({}) must be below render_hi ({})",
                self.render_lo, self.render_hi
            ));
        }
        if self.area_min > self.area_max {
            return invalid(format!(
                "area_min ({}) exceeds area_max ({})",
                self.area_min, self.area_max
            ));
        }
        if !(0.0..=1.0).contains(&self.solidity_min) {
            return invalid(format!("solidity_min ({}) outside [0, 1]", self.solidity_min));
        }
        if !(0.0..=1.0).contains(&self.eccentricity_max) {
            return invalid(format!(
                "eccentricity_max ({}) outside [0, 1]",
                self.eccentricity_max
            ));
        }
        if self.circularity_min < 0.0 {
            return invalid(format!("circularity_min ({}) is negative", self.circularity_min));
        }
        if !(0.0..=1.0).contains(&self.separability_min) {
            return invalid(format!(
                "separability_min ({}) outside [0, 1]",
                self.separability_min
            ));
        }
        Ok(())
    }

    pub fn criteria(&self) -> OvalCriteria {
        OvalCriteria {
            area_min: self.area_min,
            area_max: self.area_max,
            circularity_min: self.circularity_min,
            solidity_min: self.solidity_min,
            eccentricity_max: self.eccentricity_max,
        }
    }

    pub fn track_params(&self) -> TrackParams {
        TrackParams {
            window: (self.threshold_lo, self.threshold_hi),
            criteria: self.criteria(),
            seed_area_min: self.seed_area_min,
            seed_point: self.seed_point.map(|p| (p[0], p[1])),
            overlap_min: self.overlap_min,
            gap_tolerance: self.gap_tolerance,
        }
    }

    pub fn classify_params(&self) -> ClassifyParams {
        ClassifyParams {
            mode: self.classify_mode,
            fixed_threshold: self.classify_threshold,
            separability_min: self.separability_min,
        }
    }
}
