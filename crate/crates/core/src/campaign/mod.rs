//! Seeded experiment campaigns over random `Fixed(|S|, d)` instances.
//!
//! Trial `i` draws everything from `derive_seed(master_seed, [TRIAL, i])`, so
//! results do not depend on scheduling. Trials run on a bounded rayon pool and
//! are merged in trial order before anything is written.

mod fig1;
mod fig2;
mod fig3;
mod output;
mod single;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ConditionDenominator;
use crate::error::{Error, Result};
use crate::mdp::DiscountGrid;
use crate::modelgen::{derive_seed, FixedSpec};

pub use fig1::{fig1_trial, run_fig1, Fig1Detail, Fig1Output, Fig1Row};
pub use fig2::{fig2_trial, run_fig2, Fig2Blackwell, Fig2MeanBias, Fig2Output, Fig2Row};
pub use fig3::{fig3_trial, run_fig3, Fig3Output, Fig3Row};
pub use output::{schema, sidecar_path, write_rows, Record};
pub use single::{run_single, SingleReport};

const TAG_TRIAL: u64 = 0x0054_5249_414c; // "TRIAL"
const TAG_HAT: u64 = 0x0048_4154; // "HAT"
const TAG_MAP: u64 = 0x004d_4150; // "MAP"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Single,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Single,
    ];
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Single => "single",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "experiment",
                    format!("expected fig1, fig2, fig3 or single, got `{s}`"),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(
                "format",
                format!("expected csv or json, got `{other}`"),
            )),
        }
    }
}

/// Everything a campaign needs. `spec.seed` is ignored; instance seeds are
/// derived from `master_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub experiment: Experiment,
    pub n_mdps: usize,
    pub spec: FixedSpec,
    pub observation_sizes: Vec<usize>,
    pub gamma_grid: DiscountGrid,
    pub n_per_pair: u64,
    pub master_seed: u64,
    pub output_path: PathBuf,
    pub condition_denominator: ConditionDenominator,
    pub format: OutputFormat,
    /// Size of the worker pool; 0 uses every available core.
    pub workers: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            experiment: Experiment::Fig2,
            n_mdps: 1000,
            spec: FixedSpec::new(10, 3, 0),
            observation_sizes: vec![10, 8, 6, 4, 2, 1],
            gamma_grid: DiscountGrid::default(),
            n_per_pair: 10,
            master_seed: 0,
            output_path: PathBuf::from("results.csv"),
            condition_denominator: ConditionDenominator::Paper,
            format: OutputFormat::Csv,
            workers: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_mdps == 0 {
            return Err(Error::invalid("n_mdps", "must be at least 1"));
        }
        if self.n_per_pair == 0 {
            return Err(Error::invalid("n_per_pair", "must be at least 1"));
        }
        if self.observation_sizes.is_empty() {
            return Err(Error::invalid("obs_sizes", "must not be empty"));
        }
        if let Some(&k) = self
            .observation_sizes
            .iter()
            .find(|&&k| k == 0 || k > self.spec.n_states)
        {
            return Err(Error::invalid(
                "obs_sizes",
                format!("{k} outside 1..={}", self.spec.n_states),
            ));
        }
        Ok(())
    }

    /// Seed of trial `i`; the instance itself is generated from it.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[TAG_TRIAL, trial as u64])
    }

    pub(crate) fn instance_spec(&self, trial: usize) -> FixedSpec {
        self.spec.with_seed(self.trial_seed(trial))
    }

    /// Run the configured worker pool over `0..n_mdps` and merge in trial
    /// order. The first failing trial (by index) wins.
    pub(crate) fn run_trials<T, F>(&self, trial: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        let results: Vec<Result<T>> =
            pool.install(|| (0..self.n_mdps).into_par_iter().map(&trial).collect());
        results.into_iter().collect()
    }
}

pub(crate) fn hat_seed(trial_seed: u64) -> u64 {
    derive_seed(trial_seed, &[TAG_HAT])
}

pub(crate) fn map_seed(trial_seed: u64, n_observations: usize) -> u64 {
    derive_seed(trial_seed, &[TAG_MAP, n_observations as u64])
}

/// Run the configured experiment and write its outputs; returns every path
/// written, main table first. `single` needs inputs and goes through
/// [`run_single`] instead.
pub fn execute(config: &CampaignConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let path = config.output_path.as_path();
    let format = config.format;
    match config.experiment {
        Experiment::Fig1 => {
            let out = run_fig1(config)?;
            let detail = sidecar_path(path, "detail", format);
            write_rows(path, format, &out.rows)?;
            write_rows(&detail, format, &out.detail)?;
            Ok(vec![path.to_path_buf(), detail])
        }
        Experiment::Fig2 => {
            let out = run_fig2(config)?;
            let blackwell = sidecar_path(path, "blackwell", format);
            let mean = sidecar_path(path, "bias_mean", format);
            write_rows(path, format, &out.rows)?;
            write_rows(&blackwell, format, &out.blackwell)?;
            write_rows(&mean, format, &out.mean_bias)?;
            Ok(vec![path.to_path_buf(), blackwell, mean])
        }
        Experiment::Fig3 => {
            let out = run_fig3(config)?;
            write_rows(path, format, &out.rows)?;
            Ok(vec![path.to_path_buf()])
        }
        Experiment::Single => Err(Error::invalid(
            "experiment",
            "`single` needs an MDP file; use run_single",
        )),
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}
