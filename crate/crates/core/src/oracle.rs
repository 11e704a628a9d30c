//! Brute-force references for testing the Gibbs sampler.
//!
//! Two routes, sharing no sampling code with [`crate::sampler`]:
//!
//! * [`oracle_outcome_posterior`] enumerates every indicator vector of the
//!   outcome-only model, integrates the coefficients in closed form and the
//!   noise precision by quadrature on a log grid.
//! * [`oracle_long_mcmc`] is a random-walk Metropolis-within-Gibbs sampler
//!   for the full model. It uses the probit likelihood directly (no latent
//!   utilities), marginalises `π` so that `P(z_j = 1) = q_j`, and draws from
//!   a xoshiro generator instead of ChaCha.
//!
//! Both are slow and meant for instances with a handful of observations.

use nalgebra::{DMatrix, DVector};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::model::{HierarchicalPrior, Layout, StandardizedDataset};
use crate::normal;
use crate::sampler::diagnostics;
use crate::{Error, Result};

/// Outcome-only regression `y = F b + X β + ε`, where the columns of `F`
/// carry `N(0, σ²)` priors and those of `X` the spike-and-slab mixture.
#[derive(Debug, Clone)]
pub struct OutcomeProblem {
    pub y: DVector<f64>,
    pub fixed: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl OutcomeProblem {
    /// `F = [T, 1?]` and `X` as the sampler sees them.
    pub fn from_data(data: &StandardizedDataset) -> Self {
        let n = data.n();
        let mut cols = vec![data.outcome_treatment_column()];
        if data.intercepts.outcome {
            cols.push(DVector::from_element(n, 1.0));
        }
        Self { y: data.inner.y.clone(), fixed: DMatrix::from_columns(&cols), x: data.inner.x.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub nodes: usize,
    /// Largest change tolerated when the grid is doubled and widened.
    pub tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { nodes: 400, tol: 1e-6 }
    }
}

/// Exact posterior expectations of the outcome-only model.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePosterior {
    /// `E(b | y)` for the columns of `F`.
    pub fixed_mean: Vec<f64>,
    pub beta_mean: Vec<f64>,
    /// `P(z_j = 1 | y)`.
    pub prob_z: Vec<f64>,
    /// `E(π_j | y) = (s q_j + P(z_j = 1 | y)) / (s + 1)`.
    pub inclusion: Vec<f64>,
    pub sigma2_mean: f64,
}

const MAX_ENUMERATED: usize = 12;

struct ModelTerm {
    log_prior_z: f64,
    log_det: f64,
    quad: f64,
    mean: DVector<f64>,
    z: Vec<bool>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln λ` range comfortably covering a `Gamma(shape, rate)` law for `λ`.
fn log_range(shape: f64, rate: f64) -> (f64, f64) {
    let centre = (shape / rate).ln();
    let sd = 1.0 / shape.sqrt();
    (centre - 20.0 * sd - 1.0, centre + 10.0 * sd + 1.0)
}

pub fn oracle_outcome_posterior(problem: &OutcomeProblem, prior: &HierarchicalPrior, opts: QuadratureOptions) -> Result<OutcomePosterior> {
    prior.validate()?;
    let n = problem.y.len();
    let (kf, p) = (problem.fixed.ncols(), problem.x.ncols());
    if p > MAX_ENUMERATED {
        return Err(Error::InvalidConfig(format!("enumeration over 2^{p} models is not supported")));
    }
    if prior.p() != p || problem.fixed.nrows() != n || problem.x.nrows() != n {
        return Err(Error::DimensionMismatch("oracle problem dimensions disagree".into()));
    }
    let design = {
        let mut cols: Vec<DVector<f64>> = problem.fixed.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(problem.x.column_iter().map(|c| c.into_owned()));
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    };
    let mut terms = Vec::with_capacity(1 << p);
    for mask in 0..(1usize << p) {
        let z: Vec<bool> = (0..p).map(|j| mask >> j & 1 == 1).collect();
        let v = DVector::from_iterator(
            kf + p,
            (0..kf).map(|_| 1.0).chain(z.iter().map(|&zj| if zj { prior.tau1 * prior.tau1 } else { prior.tau0 * prior.tau0 })),
        );
        // Marginally y | z, σ² ~ N(0, σ² M), M = I + A V Aᵀ.
        let av = DMatrix::from_fn(n, kf + p, |i, k| design[(i, k)] * v[k]);
        let m = DMatrix::identity(n, n) + &av * design.transpose();
        let chol = m.cholesky().ok_or_else(|| Error::NumericalFailure("oracle marginal covariance".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let s = chol.solve(&problem.y);
        let quad = problem.y.dot(&s);
        let mean = av.transpose() * s;
        let log_prior_z = z.iter().zip(&prior.q).map(|(&zj, &q)| if zj { q.ln() } else { (1.0 - q).ln() }).sum();
        terms.push(ModelTerm { log_prior_z, log_det, quad, mean, z });
    }

    let (mut lo, mut hi) = log_range(prior.a, prior.b);
    for t in &terms {
        let (l, h) = log_range(prior.a + n as f64 / 2.0, prior.b + t.quad / 2.0);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let coarse = integrate(&terms, prior, n, kf, lo, hi, opts.nodes);
    let fine = integrate(&terms, prior, n, kf, lo - 1.0, hi + 1.0, 2 * opts.nodes);
    let pairs = [("fixed_mean", &coarse.fixed_mean, &fine.fixed_mean), ("beta_mean", &coarse.beta_mean, &fine.beta_mean), ("prob_z", &coarse.prob_z, &fine.prob_z)];
    for (name, a, b) in pairs {
        let change = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if change > opts.tol {
            return Err(Error::GridTooCoarse { quantity: name.into(), change });
        }
    }
    let change = (coarse.sigma2_mean - fine.sigma2_mean).abs();
    if change > opts.tol {
        return Err(Error::GridTooCoarse { quantity: "sigma2_mean".into(), change });
    }
    let s = prior.s;
    let inclusion = (0..p).map(|j| (s * prior.q[j] + fine.prob_z[j]) / (s + 1.0)).collect();
    Ok(OutcomePosterior { inclusion, ..fine })
}

fn integrate(terms: &[ModelTerm], prior: &HierarchicalPrior, n: usize, kf: usize, lo: f64, hi: f64, nodes: usize) -> OutcomePosterior {
    let h = (hi - lo) / (nodes - 1) as f64;
    let mut logw = Vec::with_capacity(terms.len() * nodes);
    for t in terms {
        for k in 0..nodes {
            let u = lo + h * k as f64;
            let lam = u.exp();
            let edge = if k == 0 || k == nodes - 1 { 0.5f64.ln() } else { 0.0 };
            // λ^{n/2} |M|^{-1/2} exp(-λ yᵀM⁻¹y / 2) × λ^{a-1} e^{-bλ} × dλ/du.
            logw.push(edge + t.log_prior_z - 0.5 * t.log_det + (0.5 * n as f64 + prior.a) * u - (0.5 * t.quad + prior.b) * lam);
        }
    }
    let norm = log_sum_exp(&logw);
    let p = terms.first().map_or(0, |t| t.z.len());
    let mut out = OutcomePosterior {
        fixed_mean: vec![0.0; kf],
        beta_mean: vec![0.0; p],
        prob_z: vec![0.0; p],
        inclusion: vec![],
        sigma2_mean: 0.0,
    };
    for (ti, t) in terms.iter().enumerate() {
        let mut wz = 0.0;
        for k in 0..nodes {
            let w = (logw[ti * nodes + k] - norm).exp();
            wz += w;
            out.sigma2_mean += w * (-(lo + h * k as f64)).exp();
        }
        for c in 0..kf {
            out.fixed_mean[c] += wz * t.mean[c];
        }
        for j in 0..p {
            out.beta_mean[j] += wz * t.mean[kf + j];
            if t.z[j] {
                out.prob_z[j] += wz;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Fit the probit equation too; otherwise the outcome-only model.
    pub treatment_equation: bool,
}

impl Default for LongRunConfig {
    fn default() -> Self {
        Self { iterations: 200_000, burn_in: 20_000, seed: 0, treatment_equation: true }
    }
}

/// Posterior means and their Monte-Carlo errors from the reference chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunSummary {
    pub layout: Layout,
    /// Coefficient means in layout order; absent coefficients are 0.
    pub mean: Vec<f64>,
    pub mcse: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub inclusion_mcse: Vec<f64>,
    pub sigma2: f64,
    pub sigma2_mcse: f64,
    /// `P(γ_0 > 0 | data)` when the treatment intercept is present.
    pub gamma0_positive: Option<f64>,
    pub acceptance: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    /// `N(0, σ²)`.
    ScaledFixed,
    /// `N(0, 1)`.
    UnitFixed,
    /// `β_j`, mixture scaled by `σ²`.
    Beta(usize),
    /// `γ_j`, unscaled mixture.
    Gamma(usize),
}

struct Coord {
    slot: usize,
    role: Role,
    outcome: bool,
    col: DVector<f64>,
}

struct Chain<'a> {
    prior: &'a HierarchicalPrior,
    coords: Vec<Coord>,
    sign: Vec<f64>,
    theta: Vec<f64>,
    z: Vec<bool>,
    log_s2: f64,
    resid: DVector<f64>,
    eta: DVector<f64>,
}

impl Chain<'_> {
    fn tau2(&self, j: usize) -> f64 {
        let t = if self.z[j] { self.prior.tau1 } else { self.prior.tau0 };
        t * t
    }

    fn log_prior_coef(&self, role: Role, v: f64) -> f64 {
        let s2 = self.log_s2.exp();
        let ln_n = |var: f64| -0.5 * var.ln() - 0.5 * v * v / var;
        match role {
            Role::ScaledFixed => ln_n(s2),
            Role::UnitFixed => ln_n(1.0),
            Role::Beta(j) => ln_n(self.tau2(j) * s2),
            Role::Gamma(j) => ln_n(self.tau2(j)),
        }
    }

    fn probit_loglik(&self, eta: &DVector<f64>) -> f64 {
        eta.iter().zip(&self.sign).map(|(e, s)| normal::ln_cdf(s * e)).sum()
    }

    fn outcome_loglik(&self, ss: f64, log_s2: f64) -> f64 {
        -0.5 * self.resid.len() as f64 * log_s2 - 0.5 * ss / log_s2.exp()
    }

    /// Everything in the log target that depends on `σ²`.
    fn sigma_terms(&self, log_s2: f64) -> f64 {
        let s2 = log_s2.exp();
        let mut lp = self.outcome_loglik(self.resid.norm_squared(), log_s2);
        for c in &self.coords {
            let v = self.theta[c.slot];
            match c.role {
                Role::ScaledFixed => lp += -0.5 * log_s2 - 0.5 * v * v / s2,
                Role::Beta(j) => lp += -0.5 * log_s2 - 0.5 * v * v / (self.tau2(j) * s2),
                _ => {}
            }
        }
        // λ = 1/σ² ~ Gamma(a, b), written on u = ln σ².
        lp - self.prior.a * log_s2 - self.prior.b * (-log_s2).exp()
    }
}

pub fn oracle_long_mcmc(data: &StandardizedDataset, prior: &HierarchicalPrior, cfg: LongRunConfig) -> Result<LongRunSummary> {
    prior.validate()?;
    let (n, p) = (data.n(), data.p());
    if prior.p() != p {
        return Err(Error::DimensionMismatch("prior length differs from predictor count".into()));
    }
    if cfg.iterations <= cfg.burn_in + 10 {
        return Err(Error::InvalidConfig("oracle needs more iterations than burn-in".into()));
    }
    let layout = data.layout();
    let x = &data.inner.x;
    let ones = DVector::from_element(n, 1.0);
    let mut coords = vec![Coord { slot: layout.beta_t(), role: Role::ScaledFixed, outcome: true, col: data.outcome_treatment_column() }];
    for j in 0..p {
        coords.push(Coord { slot: layout.beta(j), role: Role::Beta(j), outcome: true, col: x.column(j).into_owned() });
    }
    if let Some(k) = layout.beta0() {
        coords.push(Coord { slot: k, role: Role::ScaledFixed, outcome: true, col: ones.clone() });
    }
    if cfg.treatment_equation {
        for j in 0..p {
            coords.push(Coord { slot: layout.gamma(j), role: Role::Gamma(j), outcome: false, col: x.column(j).into_owned() });
        }
        if let Some(k) = layout.gamma0() {
            coords.push(Coord { slot: k, role: Role::UnitFixed, outcome: false, col: ones });
        }
    }
    let mut chain = Chain {
        prior,
        coords,
        sign: data.inner.t.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect(),
        theta: vec![0.0; layout.dim()],
        z: vec![true; p],
        log_s2: (prior.b / prior.a).ln(),
        resid: data.inner.y.clone(),
        eta: DVector::zeros(n),
    };
    let mut rng = SmallRng::seed_from_u64(cfg.seed);
    let nc = chain.coords.len();
    let mut step = vec![0.3; nc + 1];
    let mut acc = vec![0usize; nc + 1];
    let mut tries = 0usize;
    let kept = cfg.iterations - cfg.burn_in;
    let mut theta_draws = vec![Vec::with_capacity(kept); layout.dim()];
    let mut incl_draws = vec![Vec::with_capacity(kept); p];
    let mut s2_draws = Vec::with_capacity(kept);
    let mut total_acc = 0usize;
    let mut total_prop = 0usize;

    for it in 0..cfg.iterations {
        // Coefficients, one at a time.
        for ci in 0..nc {
            let (slot, role, outcome) = (chain.coords[ci].slot, chain.coords[ci].role, chain.coords[ci].outcome);
            let old = chain.theta[slot];
            let e: f64 = StandardNormal.sample(&mut rng);
            let delta = step[ci] * e;
            let new = old + delta;
            let col = &chain.coords[ci].col;
            let dlik = if outcome {
                let s2 = chain.log_s2.exp();
                -(-2.0 * delta * col.dot(&chain.resid) + delta * delta * col.norm_squared()) / (2.0 * s2)
            } else {
                let eta_new = &chain.eta + col * delta;
                chain.probit_loglik(&eta_new) - chain.probit_loglik(&chain.eta)
            };
            let log_ratio = dlik + chain.log_prior_coef(role, new) - chain.log_prior_coef(role, old);
            total_prop += 1;
            if rng.random::<f64>().ln() < log_ratio {
                chain.theta[slot] = new;
                let col = chain.coords[ci].col.clone();
                if outcome {
                    chain.resid.axpy(-delta, &col, 1.0);
                } else {
                    chain.eta.axpy(delta, &col, 1.0);
                }
                acc[ci] += 1;
                total_acc += 1;
            }
        }
        // Indicators: exact conditional, then a flip that rescales the pair
        // so that moves between spike and slab are not blocked.
        for j in 0..p {
            let bj = chain.theta[layout.beta(j)];
            let gj = cfg.treatment_equation.then(|| chain.theta[layout.gamma(j)]);
            let s2 = chain.log_s2.exp();
            let comp = |tau: f64| {
                let t2 = tau * tau;
                let mut l = -0.5 * (t2 * s2).ln() - 0.5 * bj * bj / (t2 * s2);
                if let Some(g) = gj {
                    l += -0.5 * t2.ln() - 0.5 * g * g / t2;
                }
                l
            };
            let l1 = prior.q[j].ln() + comp(prior.tau1);
            let l0 = (1.0 - prior.q[j]).ln() + comp(prior.tau0);
            let pr1 = 1.0 / (1.0 + (l0 - l1).exp());
            chain.z[j] = rng.random::<f64>() < pr1;

            let from = chain.z[j];
            let (tf, tt) = if from { (prior.tau1, prior.tau0) } else { (prior.tau0, prior.tau1) };
            let scale = tt / tf;
            let bcol = x.column(j).into_owned();
            let db = bj * (scale - 1.0);
            // sigma_terms drops the constant -ln τ of each β_j prior; add it back.
            let before = chain.sigma_terms(chain.log_s2) - tf.ln() + gj.map_or(0.0, |g| -0.5 * (tf * tf).ln() - 0.5 * g * g / (tf * tf));
            let old_resid = chain.resid.clone();
            let old_eta = chain.eta.clone();
            chain.resid.axpy(-db, &bcol, 1.0);
            chain.theta[layout.beta(j)] = bj * scale;
            chain.z[j] = !from;
            let mut lik_t = 0.0;
            if let Some(g) = gj {
                chain.eta.axpy(g * (scale - 1.0), &bcol, 1.0);
                chain.theta[layout.gamma(j)] = g * scale;
                lik_t = chain.probit_loglik(&chain.eta) - chain.probit_loglik(&old_eta);
            }
            let after = chain.sigma_terms(chain.log_s2) - tt.ln() + gj.map_or(0.0, |g| {
                let g = g * scale;
                -0.5 * (tt * tt).ln() - 0.5 * g * g / (tt * tt)
            });
            let dims = 1.0 + f64::from(u8::from(gj.is_some()));
            let log_q = if from { (1.0 - prior.q[j]).ln() - prior.q[j].ln() } else { prior.q[j].ln() - (1.0 - prior.q[j]).ln() };
            let log_ratio = after - before + lik_t + log_q + dims * scale.ln();
            if rng.random::<f64>().ln() >= log_ratio {
                chain.resid = old_resid;
                chain.eta = old_eta;
                chain.theta[layout.beta(j)] = bj;
                if let Some(g) = gj {
                    chain.theta[layout.gamma(j)] = g;
                }
                chain.z[j] = from;
            }
        }
        // Noise variance on the log scale.
        {
            let e: f64 = StandardNormal.sample(&mut rng);
            let new = chain.log_s2 + step[nc] * e;
            let log_ratio = chain.sigma_terms(new) - chain.sigma_terms(chain.log_s2);
            total_prop += 1;
            if rng.random::<f64>().ln() < log_ratio {
                chain.log_s2 = new;
                acc[nc] += 1;
                total_acc += 1;
            }
        }
        tries += 1;
        if it < cfg.burn_in && tries == 100 {
            for k in 0..=nc {
                let rate = acc[k] as f64 / tries as f64;
                step[k] *= ((rate - 0.44) * 2.0).exp();
                acc[k] = 0;
            }
            tries = 0;
            // Recompute cached quantities from scratch.
            chain.resid = data.inner.y.clone();
            chain.eta = DVector::zeros(n);
            for c in &chain.coords {
                if c.outcome {
                    chain.resid.axpy(-chain.theta[c.slot], &c.col, 1.0);
                } else {
                    chain.eta.axpy(chain.theta[c.slot], &c.col, 1.0);
                }
            }
        }
        if it >= cfg.burn_in {
            for (k, d) in theta_draws.iter_mut().enumerate() {
                d.push(chain.theta[k]);
            }
            for j in 0..p {
                let zj = f64::from(u8::from(chain.z[j]));
                incl_draws[j].push((prior.s * prior.q[j] + zj) / (prior.s + 1.0));
            }
            s2_draws.push(chain.log_s2.exp());
        }
    }
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gamma0_positive = layout
        .gamma0()
        .filter(|_| cfg.treatment_equation)
        .map(|k| theta_draws[k].iter().filter(|&&v| v > 0.0).count() as f64 / kept as f64);
    Ok(LongRunSummary {
        layout,
        mean: theta_draws.iter().map(|d| mean_of(d)).collect(),
        mcse: theta_draws.iter().map(|d| diagnostics::mcse(d)).collect(),
        inclusion: incl_draws.iter().map(|d| mean_of(d)).collect(),
        inclusion_mcse: incl_draws.iter().map(|d| diagnostics::mcse(d)).collect(),
        sigma2: mean_of(&s2_draws),
        sigma2_mcse: diagnostics::mcse(&s2_draws),
        gamma0_positive,
        acceptance: total_acc as f64 / total_prop as f64,
    })
}
