use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qrng_core::analytic::{ChirpJitterConfig, OpticalConfig};
use qrng_core::montecarlo::NoiseConfig;
use qrng_core::montecarlo::DEFAULT_BINS;
use qrng_core::reduction::{default_sigma_zeta_grid, DEFAULT_DENSITY_FLOOR};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub optical: OpticalConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub chirp_jitter: Option<ChirpJitterConfig>,
    pub sample_count: usize,
    pub seed: u64,
    pub bins: usize,
    pub density_floor: f64,
    pub sigma_zeta_grid: Vec<f64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1c,
    Fig2,
    Noiseless,
}

impl Preset {
    pub fn config(self) -> RunConfig {
        let base = RunConfig {
            optical: OpticalConfig::symmetric(1.0, 1.0),
            noise: NoiseConfig::gaussian(0.05, 0.1),
            chirp_jitter: None,
            sample_count: 10_000_000,
            seed: 1,
            bins: DEFAULT_BINS,
            density_floor: DEFAULT_DENSITY_FLOOR,
            sigma_zeta_grid: default_sigma_zeta_grid(),
            output_dir: PathBuf::from("out"),
        };
        match self {
            Preset::Fig1c => base,
            Preset::Noiseless => RunConfig {
                noise: NoiseConfig::noiseless(),
                ..base
            },
            Preset::Fig2 => {
                let mut optical = base.optical.clone();
                optical.visibility = None;
                let mut noise = base.noise.clone();
                noise.sigma_jitter = 20e-12;
                RunConfig {
                    optical,
                    noise,
                    chirp_jitter: Some(ChirpJitterConfig {
                        alpha: 6.0,
                        pulse_width: 50e-12,
                        overlap_offset: 0.0,
                    }),
                    ..base
                }
            }
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.optical.validate()?;
        self.noise.validate()?;
        if let Some(cj) = &self.chirp_jitter {
            cj.validate()?;
        }
        if self.noise.sigma_jitter > 0.0 && self.chirp_jitter.is_none() {
            return Err(CliError::new(
                "invalid_config",
                "noise.sigma_jitter > 0 requires chirp_jitter",
            ));
        }
        if self.optical.visibility.is_none() && self.chirp_jitter.is_none() {
            return Err(CliError::new(
                "invalid_config",
                "optical.visibility is unset and no chirp_jitter is given",
            ));
        }
        if self.sample_count < MIN_SAMPLES {
            return Err(CliError::new(
                "invalid_config",
                format!(
                    "sample_count must be >= {MIN_SAMPLES}, got {}",
                    self.sample_count
                ),
            ));
        }
        if self.bins < 16 {
            return Err(CliError::new(
                "invalid_config",
                format!("bins must be >= 16, got {}", self.bins),
            ));
        }
        if !(self.density_floor >= 0.0 && self.density_floor.is_finite()) {
            return Err(CliError::new(
                "invalid_config",
                "density_floor must be >= 0",
            ));
        }
        let g = &self.sigma_zeta_grid;
        if g.is_empty() || g.iter().any(|s| !(*s >= 0.0)) || g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::new(
                "invalid_config",
                "sigma_zeta_grid must be non-empty, non-negative and strictly increasing",
            ));
        }
        Ok(())
    }

    /// Parse a JSON config, reporting the position of syntax and field errors.
    pub fn from_json(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::new(
                "invalid_config",
                format!("{}:{}:{}: {e}", origin.display(), e.line(), e.column()),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                "invalid_config",
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        Self::from_json(&text, path)
    }
}
