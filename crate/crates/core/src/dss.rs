//! Decoupled shrinkage and selection.
//!
//! For each prior in the grid the posterior-mean fit of each equation,
//! restricted to the active set `S(q)`, is sparsified with an adaptive
//! lasso whose target is the fitted vector itself.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::StandardizedDataset;
use crate::robust::SensitivityResult;
use crate::sampler::PosteriorSummary;
use crate::{Error, Result};

/// Smallest `|β̂_j|` allowed in a `1/|β̂_j|` weight.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// `S(q) = { j : E_q(π_j | W) ≥ 1/2 }`.
pub fn active_set(summary: &PosteriorSummary) -> Vec<usize> {
    active_from_inclusion(&summary.inclusion)
}

pub fn active_from_inclusion(inclusion: &[f64]) -> Vec<usize> {
    (0..inclusion.len()).filter(|&j| inclusion[j] >= 0.5).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    /// Largest allowed KKT violation at exit.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: DVector<f64>,
    pub sweeps: usize,
    /// Largest KKT violation of the returned point.
    pub kkt: f64,
}

/// `(1/n)‖target − Xβ‖² + λ Σ w_j |β_j|`.
pub fn lasso_objective(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64], lambda: f64, beta: &DVector<f64>) -> f64 {
    let n = x.nrows() as f64;
    let r = target - x * beta;
    r.norm_squared() / n + lambda * beta.iter().zip(weights).map(|(b, w)| w * b.abs()).sum::<f64>()
}

/// Largest violation of the optimality conditions at `beta`:
/// `|g_j + λ w_j sign β_j|` on the support, `max(|g_j| − λ w_j, 0)` off it,
/// where `g_j = −(2/n) x_jᵀ(target − Xβ)`.
pub fn kkt_residual(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64], lambda: f64, beta: &DVector<f64>) -> f64 {
    let n = x.nrows() as f64;
    let r = target - x * beta;
    kkt_from_residual(x, &r, weights, lambda, beta, n)
}

fn kkt_from_residual(x: &DMatrix<f64>, r: &DVector<f64>, weights: &[f64], lambda: f64, beta: &DVector<f64>, n: f64) -> f64 {
    (0..x.ncols())
        .map(|j| {
            let c = 2.0 / n * x.column(j).dot(r);
            if beta[j] != 0.0 {
                (c - lambda * weights[j] * beta[j].signum()).abs()
            } else {
                (c.abs() - lambda * weights[j]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_inputs(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64]) -> Result<()> {
    if x.nrows() != target.len() || x.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "lasso: x is {}x{}, target has {}, weights have {}",
            x.nrows(),
            x.ncols(),
            target.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig(format!("lasso weight {w} must be positive")));
    }
    Ok(())
}

/// Cyclic coordinate descent from `start`.
pub fn adaptive_lasso_from(
    x: &DMatrix<f64>,
    target: &DVector<f64>,
    weights: &[f64],
    lambda: f64,
    start: DVector<f64>,
    opts: LassoOptions,
) -> Result<LassoFit> {
    check_inputs(x, target, weights)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lasso penalty {lambda} must be non-negative")));
    }
    let n = x.nrows() as f64;
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut beta = start;
    let mut r = target - x * &beta;
    for sweep in 1..=opts.max_sweeps {
        for j in 0..x.ncols() {
            if col_sq[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let xj = x.column(j);
            let rho = xj.dot(&r) + col_sq[j] * beta[j];
            let new = soft_threshold(rho, 0.5 * n * lambda * weights[j]) / col_sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                r.axpy(-delta, &xj, 1.0);
                beta[j] = new;
            }
        }
        // Refresh the residual now and then so rounding does not drift.
        if sweep % 64 == 0 {
            r = target - x * &beta;
        }
        let kkt = kkt_from_residual(x, &r, weights, lambda, &beta, n);
        if kkt <= opts.tol {
            let r = target - x * &beta;
            let kkt = kkt_from_residual(x, &r, weights, lambda, &beta, n);
            if kkt <= opts.tol {
                return Ok(LassoFit { coef: beta, sweeps: sweep, kkt });
            }
        }
    }
    let kkt = kkt_residual(x, target, weights, lambda, &beta);
    Err(Error::NonConvergence { sweeps: opts.max_sweeps, residual: kkt })
}

/// Adaptive lasso solution from a zero start.
pub fn adaptive_lasso_fit(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64], lambda: f64, opts: LassoOptions) -> Result<LassoFit> {
    adaptive_lasso_from(x, target, weights, lambda, DVector::zeros(x.ncols()), opts)
}

/// Smallest `λ` at which the solution is identically zero.
pub fn lambda_max(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    (0..x.ncols()).map(|j| 2.0 / n * x.column(j).dot(target).abs() / weights[j]).fold(0.0, f64::max)
}

/// Warm-started solutions on a decreasing `λ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub coefs: Vec<DVector<f64>>,
    pub objectives: Vec<f64>,
    /// `‖target − Xβ_λ‖²` per grid point.
    pub rss: Vec<f64>,
    /// Residual sum of squares of the unpenalised least-squares fit.
    pub rss_ls: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathOptions {
    pub n_lambda: usize,
    /// `λ_min / λ_max`.
    pub min_ratio: f64,
    pub lasso: LassoOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self { n_lambda: 100, min_ratio: 1e-4, lasso: LassoOptions::default() }
    }
}

/// Log-spaced grid from `λ_max` down to `min_ratio · λ_max`.
pub fn lambda_grid(lmax: f64, n_lambda: usize, min_ratio: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![lmax];
    }
    let step = min_ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda).map(|k| lmax * (step * k as f64).exp()).collect()
}

pub fn lasso_path(x: &DMatrix<f64>, target: &DVector<f64>, weights: &[f64], opts: PathOptions) -> Result<LassoPath> {
    check_inputs(x, target, weights)?;
    if opts.n_lambda == 0 || !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
        return Err(Error::InvalidConfig("lambda grid needs at least one point and 0 < min_ratio < 1".into()));
    }
    let rss_ls = least_squares_rss(x, target);
    let lmax = lambda_max(x, target, weights);
    let mut path = LassoPath { lambdas: vec![], coefs: vec![], objectives: vec![], rss: vec![], rss_ls };
    if lmax == 0.0 {
        // Target orthogonal to every column: zero is optimal everywhere.
        let zero = DVector::zeros(x.ncols());
        path.lambdas.push(0.0);
        path.objectives.push(lasso_objective(x, target, weights, 0.0, &zero));
        path.rss.push(target.norm_squared());
        path.coefs.push(zero);
        return Ok(path);
    }
    let mut warm = DVector::zeros(x.ncols());
    for (k, lambda) in lambda_grid(lmax, opts.n_lambda, opts.min_ratio).into_iter().enumerate() {
        // Zero is optimal at λ_max; solving there can leave rounding-sized
        // coefficients.
        let fit = if k == 0 {
            LassoFit { coef: warm.clone(), sweeps: 0, kkt: kkt_residual(x, target, weights, lambda, &warm) }
        } else {
            adaptive_lasso_from(x, target, weights, lambda, warm, opts.lasso)?
        };
        path.objectives.push(lasso_objective(x, target, weights, lambda, &fit.coef));
        path.rss.push((target - x * &fit.coef).norm_squared());
        path.lambdas.push(lambda);
        warm = fit.coef.clone();
        path.coefs.push(fit.coef);
    }
    Ok(path)
}

fn least_squares_rss(x: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    if x.ncols() == 0 {
        return target.norm_squared();
    }
    let svd = x.clone().svd(true, true);
    match svd.solve(target, 1e-12) {
        Ok(beta) => (target - x * beta).norm_squared(),
        Err(_) => target.norm_squared(),
    }
}

/// Index of the largest `λ` whose fit explains at least `1 − rho` of what
/// the least-squares fit explains, `1 − rss_λ/‖t‖²` against
/// `1 − rss_ls/‖t‖²`. Falls back to the smallest `λ`.
pub fn select_lambda(path: &LassoPath, target: &DVector<f64>, rho: f64) -> Result<usize> {
    if path.lambdas.is_empty() {
        return Err(Error::EmptyInput("lasso path"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("explained-variation slack {rho} outside [0, 1]")));
    }
    let tss = target.norm_squared();
    let full = tss - path.rss_ls;
    if full <= 0.0 {
        return Ok(0);
    }
    let idx = path.rss.iter().position(|&rss| (tss - rss) / full >= 1.0 - rho);
    Ok(idx.unwrap_or(path.lambdas.len() - 1))
}

/// Active sets per grid prior with their intersection and union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSets {
    pub per_q: Vec<(f64, Vec<usize>)>,
    pub s_lower: Vec<usize>,
    pub s_star: Vec<usize>,
}

impl ActiveSets {
    pub fn from_summaries(per_q: &[PosteriorSummary]) -> Self {
        let sets: Vec<(f64, Vec<usize>)> = per_q.iter().map(|s| (s.q, active_set(s))).collect();
        let p = per_q.first().map_or(0, |s| s.inclusion.len());
        let s_lower = (0..p).filter(|j| !sets.is_empty() && sets.iter().all(|(_, s)| s.contains(j))).collect();
        let s_star = (0..p).filter(|j| sets.iter().any(|(_, s)| s.contains(j))).collect();
        Self { per_q: sets, s_lower, s_star }
    }
}

/// Sparse refit of one equation under one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFit {
    /// Zero-based predictor indices of `S(q)`.
    pub support: Vec<usize>,
    /// Posterior means on `S(q)`.
    pub posterior: Vec<f64>,
    /// Sparsified coefficients on `S(q)`.
    pub coef: Vec<f64>,
    pub lambda: f64,
}

impl SparseFit {
    pub fn selected(&self) -> Vec<usize> {
        self.support.iter().zip(&self.coef).filter(|(_, c)| **c != 0.0).map(|(j, _)| *j).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssPerQ {
    pub q: f64,
    pub outcome: SparseFit,
    pub treatment: SparseFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssResult {
    pub names: Vec<String>,
    pub per_q: Vec<DssPerQ>,
    pub active: ActiveSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DssOptions {
    /// Allowed loss of explained variation when choosing `λ`.
    pub rho: f64,
    pub path: PathOptions,
}

impl Default for DssOptions {
    fn default() -> Self {
        Self { rho: 0.01, path: PathOptions::default() }
    }
}

/// Sparsifies `X_S coef` on the columns in `support`.
pub fn sparsify(x: &DMatrix<f64>, support: &[usize], coef: &[f64], opts: DssOptions) -> Result<SparseFit> {
    let posterior: Vec<f64> = support.iter().map(|&j| coef[j]).collect();
    if support.is_empty() {
        return Ok(SparseFit { support: vec![], posterior, coef: vec![], lambda: 0.0 });
    }
    let xs = x.select_columns(support);
    let target = &xs * DVector::from_column_slice(&posterior);
    let weights: Vec<f64> = posterior.iter().map(|b| 1.0 / b.abs().max(WEIGHT_FLOOR)).collect();
    let path = lasso_path(&xs, &target, &weights, opts.path)?;
    let k = select_lambda(&path, &target, opts.rho)?;
    Ok(SparseFit { support: support.to_vec(), posterior, coef: path.coefs[k].iter().copied().collect(), lambda: path.lambdas[k] })
}

/// Runs both sparse fits for every grid prior of `sensitivity`.
pub fn dss_summarize(sensitivity: &SensitivityResult, data: &StandardizedDataset, opts: DssOptions) -> Result<DssResult> {
    let p = data.p();
    if sensitivity.predictors.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "sensitivity result has {} predictors, data has {p}",
            sensitivity.predictors.len()
        )));
    }
    let x = &data.inner.x;
    let per_q = sensitivity
        .per_q
        .par_iter()
        .map(|s| {
            let support = active_set(s);
            Ok(DssPerQ {
                q: s.q,
                outcome: sparsify(x, &support, &s.beta_mean, opts)?,
                treatment: sparsify(x, &support, &s.gamma_mean, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DssResult { names: data.inner.names.clone(), per_q, active: ActiveSets::from_summaries(&sensitivity.per_q) })
}

impl DssResult {
    /// `q, side, predictor, coef, selected`, one row per member of `S(q)`
    /// and equation.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["q", "side", "predictor", "coef", "selected"])?;
        for entry in &self.per_q {
            for (side, fit) in [("outcome", &entry.outcome), ("treatment", &entry.treatment)] {
                for (&j, &c) in fit.support.iter().zip(&fit.coef) {
                    wtr.write_record([
                        entry.q.to_string(),
                        side.to_string(),
                        self.names[j].clone(),
                        c.to_string(),
                        u8::from(c != 0.0).to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn active_set_threshold() {
        assert_eq!(active_from_inclusion(&[0.9, 0.5, 0.49]), vec![0, 1]);
        assert!(active_from_inclusion(&[0.1, 0.2]).is_empty());
        assert_eq!(active_from_inclusion(&[1.0; 3]), vec![0, 1, 2]);
    }

    #[test]
    fn zero_penalty_gives_least_squares() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.3, -0.5, 1.2, 0.7, -0.4, 2.0, 0.1, -1.1, 0.9]);
        let target = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.2]);
        let fit = adaptive_lasso_fit(&x, &target, &[1.0, 1.0], 0.0, LassoOptions::default()).unwrap();
        let r = &target - &x * &fit.coef;
        assert!((x.transpose() * r).amax() <= 1e-8);
    }

    #[test]
    fn above_lambda_max_everything_is_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, -0.3, 1.0, 0.5, 0.5, -1.0, 0.1]);
        let target = DVector::from_vec(vec![2.0, -1.0, 0.4, 0.3]);
        let w = [0.5, 2.0];
        let lmax = lambda_max(&x, &target, &w);
        let fit = adaptive_lasso_fit(&x, &target, &w, lmax * (1.0 + 1e-12), LassoOptions::default()).unwrap();
        assert!(fit.coef.iter().all(|&c| c == 0.0));
        let below = adaptive_lasso_fit(&x, &target, &w, lmax * 0.9, LassoOptions::default()).unwrap();
        assert!(below.coef.iter().any(|&c| c != 0.0));
    }

    #[test]
    fn univariate_closed_form() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let b = -1.7;
        let target = x.column(0) * b;
        let (n, xtx, w) = (4.0, 4.0, 1.3);
        for lambda in [0.0, 0.1, 0.5, 1.0, 2.6, 5.0] {
            let fit = adaptive_lasso_fit(&x, &target, &[w], lambda, LassoOptions::default()).unwrap();
            let want = b.signum() * (b.abs() - n * lambda / (2.0 * xtx) * w).max(0.0);
            assert!((fit.coef[0] - want).abs() < 1e-10, "lambda {lambda}: {} vs {want}", fit.coef[0]);
        }
    }

    #[test]
    fn orthonormal_selection_drops_small_coefficient() {
        // Orthonormal columns scaled so xᵀx = 1.
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let target = &x * DVector::from_vec(vec![3.0, 0.01]);
        let w = [1.0, 1.0];
        let path = lasso_path(&x, &target, &w, PathOptions::default()).unwrap();
        let k = select_lambda(&path, &target, 0.01).unwrap();
        assert_eq!(path.coefs[k][1], 0.0);
        assert!(path.coefs[k][0] > 2.5);
        assert_eq!(select_lambda(&path, &target, 1.0).unwrap(), 0);
        assert_eq!(select_lambda(&path, &target, 0.0).unwrap(), path.lambdas.len() - 1);
    }

    #[test]
    fn path_starts_at_zero_and_decreases() {
        let x = DMatrix::from_row_slice(5, 3, &[1.0, 0.2, 0.0, 0.3, -1.0, 0.5, 0.0, 0.4, 1.0, -0.6, 0.1, 0.2, 0.9, 0.9, -0.3]);
        let target = DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3, 1.1]);
        let path = lasso_path(&x, &target, &[1.0, 0.5, 2.0], PathOptions::default()).unwrap();
        assert_eq!(path.lambdas.len(), 100);
        assert!(path.coefs[0].iter().all(|&c| c == 0.0));
        assert!(path.lambdas.windows(2).all(|w| w[1] < w[0]));
        assert!((path.lambdas[99] / path.lambdas[0] - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn empty_path_rejected() {
        let path = LassoPath { lambdas: vec![], coefs: vec![], objectives: vec![], rss: vec![], rss_ls: 0.0 };
        assert!(matches!(select_lambda(&path, &DVector::zeros(1), 0.01), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn nonconvergence_is_reported() {
        // Two nearly collinear columns: coordinate descent crawls.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.99, 0.5, 0.52, -0.3, -0.29]);
        let target = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let opts = LassoOptions { tol: 1e-12, max_sweeps: 2 };
        assert!(matches!(adaptive_lasso_fit(&x, &target, &[1.0, 1.0], 0.0, opts), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn sparsify_empty_support() {
        let x = DMatrix::from_element(3, 2, 1.0);
        let fit = sparsify(&x, &[], &[0.3, 0.2], DssOptions::default()).unwrap();
        assert!(fit.coef.is_empty() && fit.selected().is_empty());
    }
}
