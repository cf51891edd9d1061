//! Config files, one struct per command. Unknown keys are rejected.

use std::path::Path;

use cyclekernel::cycleloss::LossConfig;
use cyclekernel::divergence::DivergenceSpec;
use cyclekernel::maps::MeasurableMap;
use cyclekernel::probspace::{gaussian_diag, gaussian_mixture, make_finite, FiniteSpace, GridDensity, Space};
use cyclekernel::trainer::{TaskName, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A space as written in a config file. Grid variants are discretized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Finite {
        labels: Vec<String>,
        masses: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        sigma: Vec<f64>,
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        resolution: Vec<usize>,
    },
    /// Equal-weight mixture sharing one `sigma`.
    Mixture {
        means: Vec<Vec<f64>>,
        sigma: Vec<f64>,
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        resolution: Vec<usize>,
    },
    Grid {
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        resolution: Vec<usize>,
        values: Vec<f64>,
    },
}

impl SpaceSpec {
    pub fn build(&self) -> cyclekernel::Result<Space> {
        Ok(match self {
            SpaceSpec::Finite { labels, masses } => Space::Finite(make_finite(labels, masses)?),
            SpaceSpec::Gaussian {
                mean,
                sigma,
                bounds,
                resolution,
            } => Space::Grid(gaussian_diag(mean, sigma, bounds, resolution)?),
            SpaceSpec::Mixture {
                means,
                sigma,
                bounds,
                resolution,
            } => Space::Grid(gaussian_mixture(means, sigma, bounds, resolution)?),
            SpaceSpec::Grid {
                bounds,
                resolution,
                values,
            } => Space::Grid(GridDensity::from_values(bounds, resolution, values.clone())?),
        })
    }

    pub fn build_grid(&self, what: &str) -> Result<GridDensity, CliError> {
        match self.build()? {
            Space::Grid(g) => Ok(g),
            Space::Finite(_) => Err(CliError::Config(format!("{what} must be a grid density"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSpec {
    pub labels: Vec<String>,
    pub masses: Vec<f64>,
}

impl FiniteSpec {
    pub fn build(&self) -> cyclekernel::Result<FiniteSpace> {
        make_finite(&self.labels, &self.masses)
    }
}

fn default_mass_tol() -> f64 {
    cyclekernel::kernel::MASS_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub seed: u64,
    pub x: FiniteSpec,
    pub y: FiniteSpec,
    #[serde(default = "default_mass_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMap {
    pub name: String,
    pub map: MeasurableMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPair {
    pub name: String,
    pub p: SpaceSpec,
    pub q: SpaceSpec,
}

/// Every map is checked against every pair under every divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushforwardConfig {
    #[serde(default)]
    pub seed: u64,
    pub tol: f64,
    pub divergences: Vec<DivergenceSpec>,
    pub maps: Vec<NamedMap>,
    pub pairs: Vec<DensityPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCase {
    pub name: String,
    pub g: MeasurableMap,
    pub f: MeasurableMap,
    pub phi: MeasurableMap,
}

/// `loss.seed` is overwritten by the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default)]
    pub seed: u64,
    pub x: SpaceSpec,
    pub y: SpaceSpec,
    pub loss: LossConfig,
    pub cases: Vec<BoundCase>,
}

/// With two or more `seeds` the command runs a sweep, otherwise a single run
/// at `seed`. `trainer.seed` is overwritten by the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    #[serde(default)]
    pub seed: u64,
    pub task: TaskName,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    pub trainer: TrainConfig,
}

pub trait Seeded {
    /// Applies `--seed-override` and propagates the top-level seed.
    fn resolve(&mut self, seed_override: Option<u64>);
}

impl Seeded for KernelConfig {
    fn resolve(&mut self, seed_override: Option<u64>) {
        if let Some(s) = seed_override {
            self.seed = s;
        }
    }
}

impl Seeded for PushforwardConfig {
    fn resolve(&mut self, seed_override: Option<u64>) {
        if let Some(s) = seed_override {
            self.seed = s;
        }
    }
}

impl Seeded for BoundConfig {
    fn resolve(&mut self, seed_override: Option<u64>) {
        if let Some(s) = seed_override {
            self.seed = s;
        }
        self.loss.seed = self.seed;
    }
}

impl Seeded for TrainFileConfig {
    fn resolve(&mut self, seed_override: Option<u64>) {
        if let Some(s) = seed_override {
            self.seed = s;
            self.seeds.clear();
        }
        self.trainer.seed = self.seed;
    }
}

pub fn load<T: DeserializeOwned + Seeded>(path: &Path, seed_override: Option<u64>) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config: T =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.resolve(seed_override);
    Ok(config)
}
