//! Run settings: JSON config file merged under command-line flags.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use rbce::model::{HierarchicalPrior, StandardizeOptions};
use rbce::robust::{DEFAULT_C_HIGH, DEFAULT_C_LOW, DEFAULT_GRID_SIZE};
use rbce::sampler::{IndicatorUpdate, SamplerConfig};

use crate::failure::{Failure, Kind};

/// Everything a config file may set. Missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub c_low: f64,
    pub c_high: f64,
    pub grid: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
    pub tau0: f64,
    pub tau1: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub indicator_update: IndicatorUpdate,
    pub preprocessing: StandardizeOptions,
    /// DSS explained-variation tolerance.
    pub rho: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            c_low: DEFAULT_C_LOW,
            c_high: DEFAULT_C_HIGH,
            grid: DEFAULT_GRID_SIZE,
            burn_in: 500,
            samples: 2500,
            seed: 0,
            tau0: HierarchicalPrior::DEFAULT_TAU0,
            tau1: HierarchicalPrior::DEFAULT_TAU1,
            a: HierarchicalPrior::DEFAULT_A,
            b: HierarchicalPrior::DEFAULT_B,
            s: HierarchicalPrior::DEFAULT_S,
            indicator_update: IndicatorUpdate::default(),
            preprocessing: StandardizeOptions::default(),
            rho: rbce::dss::DssOptions::default().rho,
        }
    }
}

/// Flags shared by the model-fitting subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// Lower elicitation constant c.
    #[arg(long)]
    pub c_low: Option<f64>,
    /// Upper elicitation constant c.
    #[arg(long)]
    pub c_high: Option<f64>,
    /// Number of grid points over the prior set.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spike standard deviation.
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Slab standard deviation.
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Shape of the Gamma prior on 1/σ².
    #[arg(long)]
    pub a: Option<f64>,
    /// Rate of the Gamma prior on 1/σ².
    #[arg(long)]
    pub b: Option<f64>,
    /// Concentration of the Beta prior on π_j.
    #[arg(long)]
    pub s: Option<f64>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::new(Kind::BadConfig, format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::new(Kind::BadConfig, format!("config {}: {e}", path.display())))
    }

    pub fn apply(mut self, f: &ModelFlags) -> Self {
        set(&mut self.c_low, f.c_low);
        set(&mut self.c_high, f.c_high);
        set(&mut self.grid, f.grid);
        set(&mut self.burn_in, f.burn_in);
        set(&mut self.samples, f.samples);
        set(&mut self.seed, f.seed);
        set(&mut self.tau0, f.tau0);
        set(&mut self.tau1, f.tau1);
        set(&mut self.a, f.a);
        set(&mut self.b, f.b);
        set(&mut self.s, f.s);
        self
    }

    pub fn prior(&self, p: usize) -> Result<HierarchicalPrior, Failure> {
        Ok(HierarchicalPrior::new(self.tau0, self.tau1, self.a, self.b, self.s, vec![0.5; p])?)
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            burn_in: self.burn_in,
            samples: self.samples,
            seed: self.seed,
            indicator_update: self.indicator_update,
            ..SamplerConfig::default()
        }
    }
}
