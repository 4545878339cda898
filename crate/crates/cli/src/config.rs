//! Run configuration: one TOML file with an optional section per command.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use g3m_core::validation::engine::Resolution;
use g3m_core::validation::{ExperimentConfig, PoolSeed, Tolerances};
use g3m_core::MarketModel;

use crate::{config_err, Failure};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
}

impl RunConfig {
    /// Reads `path`, or returns the defaults when no file is given. A
    /// manifest from an earlier run is accepted and its recorded config
    /// replayed.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: crate::manifest::Manifest = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            return m.replay_config();
        }
        toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

pub fn default_experiment() -> ExperimentConfig {
    ExperimentConfig {
        model: MarketModel::constant(0.0, 0.0, 0.04, 0.0, 0.0),
        pool: PoolSeed {
            x: 100.0,
            y: 100.0,
            w: 0.5,
            gamma: 0.997,
        },
        horizon: 1.0,
        steps: 1000,
        paths: 1,
        seed: 1,
        arrivals: None,
        tolerances: Tolerances::default(),
        resolution: Resolution::default(),
        control_variate: false,
        z0: 0.0,
    }
}

/// Relative-price coefficients for the growth command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    /// Constant drift and volatility.
    Gbm { mu: f64, sigma: f64 },
    /// Limit law given as atoms `[probability, mu, sigma2]`.
    Mixture { atoms: Vec<[f64; 3]> },
    /// Limit law of `σ̃²` log-normal with constant drift, by Monte Carlo.
    LognormalVariance {
        mu: f64,
        mean_log: f64,
        sd_log: f64,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub w: f64,
    pub gamma: f64,
    #[serde(default)]
    pub mu_x: f64,
    #[serde(default)]
    pub mu_y: f64,
    pub coefficients: CoefficientConfig,
}

impl Default for GrowthConfig {
    fn default() -> GrowthConfig {
        GrowthConfig {
            w: 0.5,
            gamma: 0.997,
            mu_x: 0.0,
            mu_y: 0.0,
            coefficients: CoefficientConfig::Gbm {
                mu: 0.0,
                sigma: 1.0,
            },
        }
    }
}

/// `points` values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, Failure> {
        if self.points == 0
            || !(self.start <= self.stop)
            || !self.start.is_finite()
            || !self.stop.is_finite()
        {
            return Err(config_err(format!("{name} range is empty")));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        if self.start == self.stop {
            return Err(config_err(format!(
                "{name} range is empty: start equals stop with {} points",
                self.points
            )));
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.start + step * i as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub theta: Vec<f64>,
    pub w: Range,
    pub gamma: Range,
    /// Also write a gnuplot `nonuniform matrix` file per θ.
    #[serde(default)]
    pub matrix: bool,
}

impl Default for HeatmapConfig {
    fn default() -> HeatmapConfig {
        HeatmapConfig {
            theta: vec![0.0],
            w: Range {
                start: 0.05,
                stop: 0.95,
                points: 19,
            },
            gamma: Range {
                start: 0.5,
                stop: 0.999,
                points: 100,
            },
            matrix: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub seed: u64,
    pub tolerance_scale: f64,
    /// Subset of checks; all when empty.
    pub only: Vec<String>,
}

impl Default for ValidateConfig {
    fn default() -> ValidateConfig {
        ValidateConfig {
            seed: 20240601,
            tolerance_scale: 1.0,
            only: Vec::new(),
        }
    }
}
