//! Sensitivity analysis over a set of priors on the inclusion
//! probabilities, and the three-way decision rule built on it.
//!
//! The prior set is restricted to its diagonal: every chain uses a common
//! `q_j = q`, and `q` runs over an evenly spaced grid on `[q_low, q_high]`.
//! Bounds are minima and maxima over that grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{HierarchicalPrior, StandardizeOptions, StandardizedDataset};
use crate::sampler::{GibbsSampler, PosteriorDraws, PosteriorSummary, SamplerConfig};
use crate::seed::derive_seed;
use crate::{Error, Result};

pub const DEFAULT_C_LOW: f64 = 0.15;
pub const DEFAULT_C_HIGH: f64 = 0.35;
pub const DEFAULT_GRID_SIZE: usize = 11;

/// Interval of common prior inclusion means plus the grid it is evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub q_low: f64,
    pub q_high: f64,
    pub grid: Vec<f64>,
    /// Number of predictors whose absolute correlation with `y` exceeded
    /// `c_low` and `c_high`, when elicited from data.
    #[serde(default)]
    pub counts: Option<(usize, usize)>,
    /// Set when no predictor passed the lower threshold and the interval
    /// was clamped.
    #[serde(default)]
    pub degenerate: bool,
}

impl PriorSet {
    /// `grid_size` evenly spaced points from `q_low` to `q_high` inclusive.
    /// A zero-width interval gives a single point.
    pub fn new(q_low: f64, q_high: f64, grid_size: usize) -> Result<Self> {
        if !(q_low > 0.0 && q_low <= q_high && q_high < 1.0) {
            return Err(Error::InvalidConfig(format!("prior set [{q_low}, {q_high}] must satisfy 0 < q_low <= q_high < 1")));
        }
        let grid = if q_low == q_high {
            vec![q_low]
        } else {
            if grid_size < 2 {
                return Err(Error::InvalidConfig("a non-degenerate prior set needs at least 2 grid points".into()));
            }
            let last = (grid_size - 1) as f64;
            let mut g: Vec<f64> = (0..grid_size).map(|i| q_low + (q_high - q_low) * (i as f64 / last)).collect();
            g[grid_size - 1] = q_high;
            g
        };
        Ok(Self { q_low, q_high, grid, counts: None, degenerate: false })
    }

    pub fn singleton(q: f64) -> Result<Self> {
        Self::new(q, q, 1)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Pearson correlation of each column of `x` with `y`. Constant columns
/// get 0.
pub fn marginal_correlations(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let n = y.len() as f64;
    let ym = y.sum() / n;
    let yc = y.map(|v| v - ym);
    let syy = yc.norm_squared();
    x.column_iter()
        .map(|col| {
            let xm = col.sum() / n;
            let xc = col.map(|v| v - xm);
            let sxx = xc.norm_squared();
            let denom = (sxx * syy).sqrt();
            if denom > 0.0 {
                xc.dot(&yc) / denom
            } else {
                0.0
            }
        })
        .collect()
}

/// Builds the prior set from counts of predictors whose marginal
/// correlation with the outcome clears each threshold: the lenient
/// threshold `c_low` gives the upper end, the strict `c_high` the lower.
pub fn elicit_prior_set(x: &DMatrix<f64>, y: &DVector<f64>, c_low: f64, c_high: f64, grid_size: usize) -> Result<PriorSet> {
    if !(c_low > 0.0 && c_low <= c_high && c_high < 1.0) {
        return Err(Error::InvalidConfig(format!("correlation thresholds [{c_low}, {c_high}] must satisfy 0 < c_low <= c_high < 1")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("x has {} rows, y has {}", x.nrows(), y.len())));
    }
    let p = x.ncols();
    if p == 0 {
        return Err(Error::EmptyInput("predictor matrix"));
    }
    let corr = marginal_correlations(x, y);
    let k_upper = corr.iter().filter(|c| c.abs() > c_low).count();
    let k_lower = corr.iter().filter(|c| c.abs() > c_high).count();
    let (q_low, q_high) = elicited_bounds(k_lower, k_upper, p);
    let mut set = PriorSet::new(q_low, q_high, grid_size)?;
    set.counts = Some((k_upper, k_lower));
    if k_upper == 0 {
        log::warn!("no predictor has |corr| > {c_low}; prior set clamped to [{q_low}, {q_high}]");
        set.degenerate = true;
    }
    Ok(set)
}

/// `max(k, 1/2) / p`, kept at least half a predictor away from 1.
fn elicited_bounds(k_lower: usize, k_upper: usize, p: usize) -> (f64, f64) {
    let p = p as f64;
    let cap = 1.0 - 0.5 / p;
    let f = |k: usize| ((k as f64).max(0.5) / p).min(cap);
    (f(k_lower), f(k_upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Select,
    Reject,
    Abstain,
}

/// Selects when even the smallest inclusion expectation reaches 1/2,
/// rejects when even the largest stays below it.
pub fn classify_predictor(lo: f64, hi: f64) -> Decision {
    if lo >= 0.5 {
        Decision::Select
    } else if hi < 0.5 {
        Decision::Reject
    } else {
        Decision::Abstain
    }
}

/// Envelope `[min l_q, max u_q]` of per-prior credible intervals.
pub fn robust_credible_interval(intervals: &[(f64, f64)]) -> Result<(f64, f64)> {
    if intervals.is_empty() {
        return Err(Error::EmptyInput("credible intervals"));
    }
    Ok(intervals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(l, u)| (lo.min(l), hi.max(u))))
}

/// Costs of a false positive, a false negative and an abstention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { l1: 1.0, l2: 1.0, l3: 0.2 }
    }
}

/// `l1·fp/tn + l2·fn/tp + l3·id/p`.
pub fn misspecification_loss(fp: f64, fn_: f64, id: f64, tn: usize, tp: usize, p: usize, w: LossWeights) -> Result<f64> {
    if tn == 0 {
        return Err(Error::DivisionByZero("true negative count"));
    }
    if tp == 0 {
        return Err(Error::DivisionByZero("true positive count"));
    }
    if p == 0 {
        return Err(Error::DivisionByZero("predictor count"));
    }
    Ok(w.l1 * fp / tn as f64 + w.l2 * fn_ / tp as f64 + w.l3 * id / p as f64)
}

/// Per-predictor bounds and decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorRecord {
    pub name: String,
    /// Smallest `E_q(π_j | W)` over the grid.
    pub e_lo: f64,
    pub e_hi: f64,
    pub decision: Decision,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalEffectRecord {
    /// Bounds on the posterior mean of `β_T`.
    pub mean_lo: f64,
    pub mean_hi: f64,
    /// Envelope of the per-prior 95% intervals.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Outcome of a sensitivity fit; serialises to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub predictors: Vec<PredictorRecord>,
    pub causal_effect: CausalEffectRecord,
    pub grid: Vec<f64>,
    pub prior_set: PriorSet,
    /// Zero-based indices selected under every prior.
    pub s_lower: Vec<usize>,
    /// Zero-based indices selected under at least one prior.
    pub s_star: Vec<usize>,
    pub per_q: Vec<PosteriorSummary>,
    pub prior: HierarchicalPrior,
    pub preprocessing: StandardizeOptions,
}

impl SensitivityResult {
    /// Aggregates per-prior summaries, ordered like `prior_set.grid`.
    pub fn from_summaries(
        names: &[String],
        prior_set: PriorSet,
        per_q: Vec<PosteriorSummary>,
        prior: HierarchicalPrior,
        preprocessing: StandardizeOptions,
    ) -> Result<Self> {
        if per_q.is_empty() {
            return Err(Error::EmptyInput("per-prior summaries"));
        }
        let p = names.len();
        let range = |f: &dyn Fn(&PosteriorSummary) -> f64| -> (f64, f64) {
            per_q.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let mut predictors = Vec::with_capacity(p);
        for (j, name) in names.iter().enumerate() {
            let (e_lo, e_hi) = range(&|s| s.inclusion[j]);
            let (beta_lo, beta_hi) = range(&|s| s.beta_mean[j]);
            let (gamma_lo, gamma_hi) = range(&|s| s.gamma_mean[j]);
            predictors.push(PredictorRecord {
                name: name.clone(),
                e_lo,
                e_hi,
                decision: classify_predictor(e_lo, e_hi),
                beta_lo,
                beta_hi,
                gamma_lo,
                gamma_hi,
            });
        }
        let (mean_lo, mean_hi) = range(&|s| s.beta_t.mean);
        let intervals: Vec<(f64, f64)> = per_q.iter().map(|s| (s.beta_t.ci_lo, s.beta_t.ci_hi)).collect();
        let (ci_lo, ci_hi) = robust_credible_interval(&intervals)?;
        let s_lower = (0..p).filter(|&j| predictors[j].decision == Decision::Select).collect();
        let s_star = (0..p).filter(|&j| predictors[j].decision != Decision::Reject).collect();
        Ok(Self {
            predictors,
            causal_effect: CausalEffectRecord { mean_lo, mean_hi, ci_lo, ci_hi },
            grid: prior_set.grid.clone(),
            prior_set,
            s_lower,
            s_star,
            per_q,
            prior,
            preprocessing,
        })
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.predictors.iter().map(|r| r.decision).collect()
    }

    pub fn count(&self, d: Decision) -> usize {
        self.predictors.iter().filter(|r| r.decision == d).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Runs one chain per grid point and aggregates the bounds.
///
/// The chain at grid value `q` is seeded from `(cfg.seed, q)`, so a grid
/// point shared by two grids produces the same draws in both.
pub fn sensitivity_fit(
    data: &StandardizedDataset,
    prior_template: &HierarchicalPrior,
    prior_set: &PriorSet,
    cfg: &SamplerConfig,
) -> Result<SensitivityResult> {
    let draws = sensitivity_draws(data, prior_template, prior_set, cfg)?;
    aggregate_draws(data, prior_template, prior_set, &draws)
}

/// The per-grid-point chains behind [`sensitivity_fit`], in grid order.
pub fn sensitivity_draws(
    data: &StandardizedDataset,
    prior_template: &HierarchicalPrior,
    prior_set: &PriorSet,
    cfg: &SamplerConfig,
) -> Result<Vec<PosteriorDraws>> {
    cfg.validate()?;
    if prior_template.p() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} inclusion means, data has {} predictors",
            prior_template.p(),
            data.p()
        )));
    }
    prior_set
        .grid
        .par_iter()
        .map(|&q| {
            let prior = prior_template.at_common_q(q)?;
            let chain_cfg = SamplerConfig { seed: derive_seed(cfg.seed, &[q.to_bits()]), ..cfg.clone() };
            GibbsSampler::new(data, &prior)?.run(&chain_cfg)
        })
        .collect()
}

pub fn aggregate_draws(
    data: &StandardizedDataset,
    prior_template: &HierarchicalPrior,
    prior_set: &PriorSet,
    draws: &[PosteriorDraws],
) -> Result<SensitivityResult> {
    let per_q = draws.iter().map(PosteriorDraws::summary).collect();
    SensitivityResult::from_summaries(&data.inner.names, prior_set.clone(), per_q, prior_template.clone(), data.options)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elicitation_counts() {
        // Columns built to have correlations 0.1, 0.2, 0.4 with y.
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let e = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let col = |r: f64| y.clone() * r + e.clone() * (1.0 - r * r).sqrt();
        let x = DMatrix::from_columns(&[col(0.1), col(0.2), col(0.4)]);
        let corr = marginal_correlations(&x, &y);
        assert!((corr[2] - 0.4).abs() < 1e-12);
        let set = elicit_prior_set(&x, &y, 0.15, 0.35, 11).unwrap();
        assert_eq!(set.counts, Some((2, 1)));
        assert!((set.q_low - 1.0 / 3.0).abs() < 1e-15);
        assert!((set.q_high - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(set.grid.len(), 11);
        assert_eq!(set.grid[0], set.q_low);
        assert_eq!(set.grid[10], set.q_high);
        assert!(!set.degenerate);
    }

    #[test]
    fn elicitation_clamps_when_nothing_correlates() {
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let e = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let x = DMatrix::from_fn(4, 10, |i, _| e[i]);
        let set = elicit_prior_set(&x, &y, 0.15, 0.35, 11).unwrap();
        assert!(set.degenerate);
        assert_eq!((set.q_low, set.q_high), (0.05, 0.05));
        assert_eq!(set.grid, vec![0.05]);
    }

    #[test]
    fn elicitation_keeps_q_below_one() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.5]);
        let x = DMatrix::from_fn(4, 2, |i, _| y[i]);
        let set = elicit_prior_set(&x, &y, 0.15, 0.35, 3).unwrap();
        assert_eq!((set.q_low, set.q_high), (0.75, 0.75));
    }

    #[test]
    fn bad_thresholds_rejected() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let x = DMatrix::from_fn(2, 1, |i, _| i as f64);
        assert!(matches!(elicit_prior_set(&x, &y, 0.4, 0.2, 3), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn classification_rule() {
        assert_eq!(classify_predictor(0.6, 0.7), Decision::Select);
        assert_eq!(classify_predictor(0.3, 0.6), Decision::Abstain);
        assert_eq!(classify_predictor(0.1, 0.4), Decision::Reject);
        assert_eq!(classify_predictor(0.5, 0.5), Decision::Select);
        assert_eq!(classify_predictor(0.4999, 0.5), Decision::Abstain);
    }

    #[test]
    fn envelope() {
        assert_eq!(robust_credible_interval(&[(3.9, 4.1)]).unwrap(), (3.9, 4.1));
        assert_eq!(robust_credible_interval(&[(3.8, 4.0), (3.9, 4.2)]).unwrap(), (3.8, 4.2));
        assert!(matches!(robust_credible_interval(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn loss_values() {
        let w = LossWeights::default();
        assert_eq!(misspecification_loss(0.0, 0.0, 0.0, 40, 10, 50, w).unwrap(), 0.0);
        // 0.7/40 + 0.2/10 + 0.2*30.4/50 = 0.0175 + 0.02 + 0.1216
        let l = misspecification_loss(0.7, 0.2, 30.4, 40, 10, 50, w).unwrap();
        assert!((l - 0.1591).abs() < 1e-12, "{l}");
        let no_abstain = LossWeights { l3: 0.0, ..w };
        assert_eq!(misspecification_loss(0.0, 0.0, 17.0, 40, 10, 50, no_abstain).unwrap(), 0.0);
        assert!(matches!(misspecification_loss(0.0, 0.0, 0.0, 0, 10, 50, w), Err(Error::DivisionByZero(_))));
        assert!(matches!(misspecification_loss(0.0, 0.0, 0.0, 40, 0, 50, w), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn grid_layout() {
        let g = PriorSet::new(0.1, 0.3, 3).unwrap();
        assert_eq!(g.grid, vec![0.1, 0.2, 0.3]);
        assert!(PriorSet::new(0.1, 0.3, 1).is_err());
        assert_eq!(PriorSet::singleton(0.2).unwrap().grid, vec![0.2]);
        // Points of the coarse grid reappear bit-for-bit in the fine one.
        let fine = PriorSet::new(0.1, 0.3, 11).unwrap();
        for q in &g.grid {
            assert!(fine.grid.contains(q));
        }
    }
}
