//! Run configuration shared by every command.
//!
//! Relative paths in the file resolve against the file's own directory, so a
//! config can travel with its dataset.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::domain::FuelPolicy;
use crate::mcsim::{DEFAULT_DEDUCTIBLE_RATE, DEFAULT_ITERATIONS, DEFAULT_OPEN_BRACKET_CAP};
use crate::solver::{Engine, HeuristicParams};
use crate::sweep::{default_grid, validate_grid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{what} file {} does not exist", path.display())]
    MissingFile { what: &'static str, path: PathBuf },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub roads: PathBuf,
    pub arcs: PathBuf,
    pub traffic: PathBuf,
    pub brackets: PathBuf,
    pub instance: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSettings {
    #[serde(default = "default_deductible")]
    pub deductible_rate: f64,
    #[serde(default = "default_cap")]
    pub open_bracket_cap: f64,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    pub seed: u64,
}

fn default_deductible() -> f64 {
    DEFAULT_DEDUCTIBLE_RATE
}

fn default_cap() -> f64 {
    DEFAULT_OPEN_BRACKET_CAP
}

fn default_iterations() -> u64 {
    DEFAULT_ITERATIONS
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    /// Record per-point solve times in sweep.csv. Off by default because
    /// timings differ between otherwise identical runs.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_engine() -> Engine {
    Engine::Exact
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            engine: default_engine(),
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    pub costs: FuelPolicy,
    pub risk: RiskSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub heuristic: HeuristicParams,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub engine: Option<Engine>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data.roads);
        resolve(&mut cfg.data.arcs);
        resolve(&mut cfg.data.traffic);
        resolve(&mut cfg.data.brackets);
        resolve(&mut cfg.data.instance);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let cfg = Self::parse(&text, base, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.risk.seed = s;
        }
        if let Some(n) = o.iterations {
            self.risk.iterations = n;
        }
        if let Some(e) = o.engine {
            self.sweep.engine = e;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        self.validate()
    }

    /// Every input file exists; seed, iterations and the grid are usable.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let files = [
            ("roads", &self.data.roads),
            ("arcs", &self.data.arcs),
            ("traffic", &self.data.traffic),
            ("brackets", &self.data.brackets),
            ("instance", &self.data.instance),
        ];
        for (what, path) in files {
            if !path.is_file() {
                return Err(ConfigError::MissingFile {
                    what,
                    path: path.clone(),
                });
            }
        }
        if self.risk.seed == 0 {
            return Err(ConfigError::Invalid("risk.seed must be positive".into()));
        }
        if self.risk.iterations == 0 {
            return Err(ConfigError::Invalid("risk.iterations must be positive".into()));
        }
        validate_grid(&self.sweep.grid).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
