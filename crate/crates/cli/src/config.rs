//! Flat TOML configuration merged with command-line overrides.
//!
//! Precedence is flag, then environment (workers only), then config file,
//! then built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use repdecode::decoder::{default_beta_grid, RidgeConfig};
use repdecode::probe::ProbeConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_COMPONENTS: usize = 256;

/// Keys accepted in the config file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub components: Option<usize>,
    pub beta_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub inner_folds: Option<usize>,
    pub probe_rank: Option<usize>,
    pub probe_epochs: Option<usize>,
    pub probe_learning_rate: Option<f64>,
    pub probe_batch_size: Option<usize>,
    pub probe_test_fraction: Option<f64>,
    pub bootstrap_resamples: Option<usize>,
    pub confidence: Option<f64>,
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Values given on the command line; `None` defers to the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub components: Option<usize>,
    pub beta_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub inner_folds: Option<usize>,
    pub probe_rank: Option<usize>,
    pub probe_epochs: Option<usize>,
    pub probe_test_fraction: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub components: usize,
    pub ridge: RidgeConfig,
    pub probe: ProbeConfig,
    pub probe_test_fraction: f64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub alpha: f64,
}

impl AnalysisConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> CliResult<Self> {
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let ridge = RidgeConfig {
            beta_grid: flags
                .beta_grid
                .or(file.beta_grid)
                .unwrap_or_else(default_beta_grid),
            outer_folds: flags.folds.or(file.folds).unwrap_or(8),
            inner_folds: flags.inner_folds.or(file.inner_folds).unwrap_or(7),
            seed,
        };
        let defaults = ProbeConfig::default();
        let probe = ProbeConfig {
            rank: flags.probe_rank.or(file.probe_rank).unwrap_or(defaults.rank),
            epochs: flags.probe_epochs.or(file.probe_epochs).unwrap_or(defaults.epochs),
            learning_rate: file.probe_learning_rate.unwrap_or(defaults.learning_rate),
            batch_size: file.probe_batch_size.unwrap_or(defaults.batch_size),
            seed,
            ..defaults
        };
        let cfg = AnalysisConfig {
            manifest: flags.manifest.or(file.manifest),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed,
            workers: flags.workers.or(file.workers),
            components: flags.components.or(file.components).unwrap_or(DEFAULT_COMPONENTS),
            ridge,
            probe,
            probe_test_fraction: flags
                .probe_test_fraction
                .or(file.probe_test_fraction)
                .unwrap_or(0.2),
            bootstrap_resamples: file.bootstrap_resamples.unwrap_or(1000),
            confidence: file.confidence.unwrap_or(0.95),
            alpha: flags.alpha.or(file.alpha).unwrap_or(0.01),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.components == 0 {
            return Err(CliError::usage("components must be at least 1"));
        }
        if let Some(m) = &self.manifest {
            if !m.exists() {
                return Err(CliError::usage(format!("manifest {} does not exist", m.display())));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::usage("workers must be at least 1"));
        }
        self.ridge.validate().map_err(|e| CliError::usage(e.to_string()))?;
        self.probe.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if !(self.probe_test_fraction > 0.0 && self.probe_test_fraction < 1.0) {
            return Err(CliError::usage("probe test fraction must be in (0, 1)"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(CliError::usage("bootstrap resamples must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(CliError::usage("confidence must be in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::usage("alpha must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn require_manifest(&self) -> CliResult<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::usage("no manifest given (--manifest or config key `manifest`)"))
    }

    /// Runs `f` on a pool of the configured size, or rayon's default pool.
    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> CliResult<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::usage(format!("worker pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}
