//! Synthetic data and the simulation studies.
//!
//! Predictors are AR(1)-correlated Gaussians, treatment follows a logistic
//! law, and the outcome is linear with true causal effect 4. A study runs
//! the full robust pipeline on every (grid value, replicate) cell and
//! aggregates estimation, dispersion and selection metrics per grid value.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{standardize, Dataset, HierarchicalPrior, StandardizeOptions};
use crate::robust::{self, Decision, LossWeights, SensitivityResult};
use crate::sampler::{diagnostics, SamplerConfig};
use crate::seed::{derive_seed, rng_for};
use crate::{Error, Result};

pub const TRUE_EFFECT: f64 = 4.0;
pub const NOISE_SD: f64 = 0.1;
pub const AR_RHO: f64 = 0.3;

/// `Σ_ij = ρ^|i−j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `n × p` matrix with i.i.d. rows from `N(0, Σ)`, `Σ` the AR(1) matrix.
pub fn gen_design(n: usize, p: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig(format!("design must be at least 1 x 1, got {n} x {p}")));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!("AR coefficient {rho} must lie in (-1, 1)")));
    }
    let mut rng = rng_for(seed, &[]);
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            let v = if j == 0 { e } else { rho * prev + innov * e };
            x[(i, j)] = v;
            prev = v;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "1a")]
    C1a,
    #[serde(rename = "1b")]
    C1b,
    #[serde(rename = "2a")]
    C2a,
    #[serde(rename = "2b")]
    C2b,
}

impl Case {
    /// Number of leading predictors with nonzero `(β, γ)`.
    pub fn supports(self) -> (usize, usize) {
        match self {
            Case::C1a | Case::C2a => (10, 10),
            Case::C1b | Case::C2b => (15, 10),
        }
    }

    /// Studies of family 1 vary `n` at `p = 50`; family 2 varies `p` at `n = 40`.
    pub fn varies_n(self) -> bool {
        matches!(self, Case::C1a | Case::C1b)
    }

    pub fn grid_label(self) -> &'static str {
        if self.varies_n() {
            "n"
        } else {
            "p"
        }
    }

    /// `(n, p)` for one grid value.
    pub fn dims(self, grid_value: usize) -> (usize, usize) {
        if self.varies_n() {
            (grid_value, 50)
        } else {
            (40, grid_value)
        }
    }

    /// Grid used in the published studies: 25, 30, ..., 75.
    pub fn default_grid(self) -> Vec<usize> {
        (1..=11).map(|k| 20 + 5 * k).collect()
    }

    fn code(self) -> u64 {
        match self {
            Case::C1a => 0,
            Case::C1b => 1,
            Case::C2a => 2,
            Case::C2b => 3,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::C1a => "1a",
            Case::C1b => "1b",
            Case::C2a => "2a",
            Case::C2b => "2b",
        })
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1a" => Ok(Case::C1a),
            "1b" => Ok(Case::C1b),
            "2a" => Ok(Case::C2a),
            "2b" => Ok(Case::C2b),
            other => Err(Error::InvalidConfig(format!("unknown case {other:?} (expected 1a, 1b, 2a or 2b)"))),
        }
    }
}

/// How nonzero true coefficients are sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitudes {
    /// `+1, −1, +1, ...` along the support.
    #[default]
    Unit,
    /// `U(0.5, 1.5)` with a random sign.
    Uniform,
}

/// Generating parameters of one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta_t: f64,
    pub noise_sd: f64,
    pub ar_rho: f64,
}

impl TruthSpec {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self { beta, gamma, beta_t: TRUE_EFFECT, noise_sd: NOISE_SD, ar_rho: AR_RHO }
    }

    pub fn for_case(case: Case, p: usize, mode: Magnitudes, seed: u64) -> Self {
        let (beta, gamma) = truth_magnitudes(case, p, mode, seed);
        Self::new(beta, gamma)
    }

    /// Predictor `j` enters at least one of the two equations.
    pub fn active(&self, j: usize) -> bool {
        self.beta[j] != 0.0 || self.gamma[j] != 0.0
    }
}

/// True `(β, γ)` for a case, the support truncated to `p`.
pub fn truth_magnitudes(case: Case, p: usize, mode: Magnitudes, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let (kb, kg) = case.supports();
    truth_from_supports(kb, kg, p, mode, seed)
}

/// `β_j ≠ 0` for the first `beta_support` predictors, `γ_j ≠ 0` for the
/// first `gamma_support`.
pub fn truth_from_supports(beta_support: usize, gamma_support: usize, p: usize, mode: Magnitudes, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(seed, &[]);
    let mut draw = |j: usize| -> f64 {
        match mode {
            Magnitudes::Unit => {
                if j % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Magnitudes::Uniform => {
                let m = rng.random_range(0.5..1.5);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        }
    };
    let beta = (0..p).map(|j| if j < beta_support { draw(j) } else { 0.0 }).collect();
    let gamma = (0..p).map(|j| if j < gamma_support { draw(j) } else { 0.0 }).collect();
    (beta, gamma)
}

/// Draws `T_i ~ Bernoulli(logistic(x_i·γ))` and
/// `Y_i = β_T T_i + x_i·β + ε_i`, `ε_i ~ N(0, noise_sd²)`.
pub fn gen_response(x: &DMatrix<f64>, truth: &TruthSpec, seed: u64) -> Result<(Vec<bool>, DVector<f64>)> {
    let p = x.ncols();
    if truth.beta.len() != p || truth.gamma.len() != p {
        return Err(Error::DimensionMismatch(format!("truth has {} / {} coefficients, design has {p} columns", truth.beta.len(), truth.gamma.len())));
    }
    let mut rng = rng_for(seed, &[]);
    let beta = DVector::from_column_slice(&truth.beta);
    let gamma = DVector::from_column_slice(&truth.gamma);
    let eta_t = x * gamma;
    let eta_y = x * beta;
    let mut t = Vec::with_capacity(x.nrows());
    let mut y = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        let prob = 1.0 / (1.0 + (-eta_t[i]).exp());
        let ti = rng.random::<f64>() < prob;
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] = truth.beta_t * f64::from(u8::from(ti)) + eta_y[i] + truth.noise_sd * e;
        t.push(ti);
    }
    Ok((t, y))
}

/// Complete specification of one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub case: Case,
    /// Values of `n` (family 1) or `p` (family 2).
    pub grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub magnitudes: Magnitudes,
    pub c_low: f64,
    pub c_high: f64,
    pub grid_size: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub tau0: f64,
    pub tau1: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub preprocessing: StandardizeOptions,
    pub losses: LossWeights,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            case: Case::C1a,
            grid: Case::C1a.default_grid(),
            replicates: 20,
            master_seed: 1,
            magnitudes: Magnitudes::Unit,
            c_low: robust::DEFAULT_C_LOW,
            c_high: robust::DEFAULT_C_HIGH,
            grid_size: robust::DEFAULT_GRID_SIZE,
            burn_in: 500,
            samples: 2500,
            tau0: HierarchicalPrior::DEFAULT_TAU0,
            tau1: HierarchicalPrior::DEFAULT_TAU1,
            a: HierarchicalPrior::DEFAULT_A,
            b: HierarchicalPrior::DEFAULT_B,
            s: HierarchicalPrior::DEFAULT_S,
            preprocessing: StandardizeOptions::default(),
            losses: LossWeights::default(),
        }
    }
}

impl StudyConfig {
    pub fn new(case: Case, grid: Vec<usize>, replicates: usize, master_seed: u64) -> Self {
        Self { case, grid, replicates, master_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("study grid is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        for &g in &self.grid {
            let (n, p) = self.case.dims(g);
            if n < 3 || p < 1 {
                return Err(Error::InvalidConfig(format!("grid value {g} gives n={n}, p={p}")));
            }
        }
        self.prior_template(1)?;
        Ok(())
    }

    fn prior_template(&self, p: usize) -> Result<HierarchicalPrior> {
        HierarchicalPrior::new(self.tau0, self.tau1, self.a, self.b, self.s, vec![0.5; p])
    }

    fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig { burn_in: self.burn_in, samples: self.samples, seed, ..SamplerConfig::default() }
    }

    fn cell_seed(&self, grid_value: usize, replicate: usize, stream: u64) -> u64 {
        derive_seed(self.master_seed, &[self.case.code(), grid_value as u64, replicate as u64, stream])
    }

    /// Data set of one cell, with the truth used to generate it.
    pub fn generate(&self, grid_value: usize, replicate: usize) -> Result<(Dataset, TruthSpec)> {
        let (n, p) = self.case.dims(grid_value);
        let truth = TruthSpec::for_case(self.case, p, self.magnitudes, self.cell_seed(grid_value, replicate, 3));
        let x = gen_design(n, p, truth.ar_rho, self.cell_seed(grid_value, replicate, 0))?;
        let (t, y) = gen_response(&x, &truth, self.cell_seed(grid_value, replicate, 1))?;
        Ok((Dataset::from_parts(y, t, x)?, truth))
    }
}

/// What one replicate contributes to the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub grid_value: usize,
    pub replicate: usize,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
    pub fp: usize,
    pub fn_: usize,
    pub id: usize,
    pub q_low: f64,
    pub q_high: f64,
}

/// Elicits the prior set, fits, and scores one cell against the truth.
pub fn run_replicate(cfg: &StudyConfig, grid_value: usize, replicate: usize) -> Result<(ReplicateOutcome, SensitivityResult)> {
    let (data, truth) = cfg.generate(grid_value, replicate)?;
    let std = standardize(&data, cfg.preprocessing)?;
    let set = robust::elicit_prior_set(&std.inner.x, &std.inner.y, cfg.c_low, cfg.c_high, cfg.grid_size)?;
    let prior = cfg.prior_template(data.p())?;
    let fit = robust::sensitivity_fit(&std, &prior, &set, &cfg.sampler(cfg.cell_seed(grid_value, replicate, 2)))?;
    let outcome = score(&fit, &truth, grid_value, replicate);
    Ok((outcome, fit))
}

/// Counts selection errors and coverage of one fit.
pub fn score(fit: &SensitivityResult, truth: &TruthSpec, grid_value: usize, replicate: usize) -> ReplicateOutcome {
    let (mut fp, mut fn_, mut id) = (0, 0, 0);
    for (j, rec) in fit.predictors.iter().enumerate() {
        match (rec.decision, truth.active(j)) {
            (Decision::Select, false) => fp += 1,
            (Decision::Reject, true) => fn_ += 1,
            (Decision::Abstain, _) => id += 1,
            _ => {}
        }
    }
    let ce = fit.causal_effect;
    ReplicateOutcome {
        grid_value,
        replicate,
        mean_lo: ce.mean_lo,
        mean_hi: ce.mean_hi,
        ci_lo: ce.ci_lo,
        ci_hi: ce.ci_hi,
        covered: ce.ci_lo <= truth.beta_t && truth.beta_t <= ce.ci_hi,
        fp,
        fn_,
        id,
        q_low: fit.prior_set.q_low,
        q_high: fit.prior_set.q_high,
    }
}

/// One table row: replicate aggregates at one grid value.
///
/// `mean`, `median`, `sd` and `mse` are computed across replicates for the
/// series of lower bounds and for the series of upper bounds; the `_lo`
/// column holds the smaller of the two and `_hi` the larger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub grid_value: usize,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub median_lo: f64,
    pub median_hi: f64,
    pub sd_lo: f64,
    pub sd_hi: f64,
    pub mse_lo: f64,
    pub mse_hi: f64,
    pub ci_pct: f64,
    pub fp: f64,
    pub fn_: f64,
    pub id: f64,
    pub loss: f64,
}

impl MetricsRow {
    /// Aggregates the replicates of one grid value. `truth` supplies the
    /// active set for the loss denominators.
    pub fn aggregate(grid_value: usize, reps: &[ReplicateOutcome], truth: &TruthSpec, losses: LossWeights) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::EmptyInput("replicates"));
        }
        let m = reps.len() as f64;
        let lows: Vec<f64> = reps.iter().map(|r| r.mean_lo).collect();
        let highs: Vec<f64> = reps.iter().map(|r| r.mean_hi).collect();
        let stat = |f: &dyn Fn(&[f64]) -> f64| {
            let (a, b) = (f(&lows), f(&highs));
            (a.min(b), a.max(b))
        };
        let (mean_lo, mean_hi) = stat(&|v| v.iter().sum::<f64>() / v.len() as f64);
        let (median_lo, median_hi) = stat(&|v| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            diagnostics::quantile(&s, 0.5)
        });
        let (sd_lo, sd_hi) = stat(&sample_sd);
        let (mse_lo, mse_hi) = stat(&|v| v.iter().map(|e| (e - truth.beta_t).powi(2)).sum::<f64>() / v.len() as f64);
        let avg = |f: &dyn Fn(&ReplicateOutcome) -> usize| reps.iter().map(|r| f(r) as f64).sum::<f64>() / m;
        let (fp, fn_, id) = (avg(&|r| r.fp), avg(&|r| r.fn_), avg(&|r| r.id));
        let p = truth.beta.len();
        let tp = (0..p).filter(|&j| truth.active(j)).count();
        let loss = robust::misspecification_loss(fp, fn_, id, p - tp, tp, p, losses).unwrap_or(f64::NAN);
        Ok(Self {
            grid_value,
            mean_lo,
            mean_hi,
            median_lo,
            median_hi,
            sd_lo,
            sd_hi,
            mse_lo,
            mse_hi,
            ci_pct: 100.0 * reps.iter().filter(|r| r.covered).count() as f64 / m,
            fp,
            fn_,
            id,
            loss,
        })
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<MetricsRow>,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Runs every (grid value, replicate) cell in parallel and aggregates in
/// index order.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg.grid.iter().flat_map(|&g| (0..cfg.replicates).map(move |r| (g, r))).collect();
    let outcomes: Vec<ReplicateOutcome> = cells
        .par_iter()
        .map(|&(g, r)| {
            run_replicate(cfg, g, r).map(|(o, _)| o).map_err(|e| {
                log::error!("case {} {}={g} replicate {r} failed: {e}", cfg.case, cfg.case.grid_label());
                e
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for (k, &g) in cfg.grid.iter().enumerate() {
        let reps = &outcomes[k * cfg.replicates..(k + 1) * cfg.replicates];
        let (_, p) = cfg.case.dims(g);
        let truth = TruthSpec::for_case(cfg.case, p, Magnitudes::Unit, 0);
        rows.push(MetricsRow::aggregate(g, reps, &truth, cfg.losses)?);
    }
    Ok(StudyResult { config: cfg.clone(), rows, replicates: outcomes })
}

impl StudyResult {
    /// `label, mean_lo, mean_hi, median_lo, median_hi`.
    pub fn write_estimation_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.write_table(w, &["mean_lo", "mean_hi", "median_lo", "median_hi"], |r| vec![r.mean_lo, r.mean_hi, r.median_lo, r.median_hi])
    }

    /// `label, sd_lo, sd_hi, mse_lo, mse_hi, ci_pct`.
    pub fn write_dispersion_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.write_table(w, &["sd_lo", "sd_hi", "mse_lo", "mse_hi", "ci_pct"], |r| vec![r.sd_lo, r.sd_hi, r.mse_lo, r.mse_hi, r.ci_pct])
    }

    /// `label, fp, fn, id, loss`.
    pub fn write_selection_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.write_table(w, &["fp", "fn", "id", "loss"], |r| vec![r.fp, r.fn_, r.id, r.loss])
    }

    /// `grid_value, replicate, quantity, value`, one line per replicate
    /// quantity.
    pub fn write_long_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["grid_value", "replicate", "quantity", "value"])?;
        for r in &self.replicates {
            let fields: [(&str, f64); 10] = [
                ("mean_lo", r.mean_lo),
                ("mean_hi", r.mean_hi),
                ("ci_lo", r.ci_lo),
                ("ci_hi", r.ci_hi),
                ("covered", f64::from(u8::from(r.covered))),
                ("fp", r.fp as f64),
                ("fn", r.fn_ as f64),
                ("id", r.id as f64),
                ("q_low", r.q_low),
                ("q_high", r.q_high),
            ];
            for (name, v) in fields {
                wtr.write_record([r.grid_value.to_string(), r.replicate.to_string(), name.to_string(), v.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    fn write_table<W: std::io::Write>(&self, w: W, cols: &[&str], f: impl Fn(&MetricsRow) -> Vec<f64>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![self.config.case.grid_label().to_string()];
        header.extend(cols.iter().map(|s| s.to_string()));
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.grid_value.to_string()];
            rec.extend(f(r).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
