//! Gibbs sampler for the joint spike-and-slab outcome/probit model.
//!
//! One sweep updates, in order:
//!
//! 1. the latent utilities `T*` (truncated normals, probit augmentation);
//! 2. all coefficients `ν` jointly, one Cholesky factorisation per
//!    equation (the posterior precision is block diagonal);
//! 3. the mixture indicators `z_j`, by default jointly with `(β_j, γ_j)`
//!    with the coefficient pair integrated out;
//! 4. the inclusion probabilities `π_j` (conjugate Beta);
//! 5. the noise variance `σ²` (conjugate Gamma on the precision).
//!
//! Step 3 matters for small spike widths: conditionally on `(β_j, γ_j)` the
//! indicator is almost deterministic when `τ0` is tiny, so the plain
//! conditional update ([`IndicatorUpdate::Conditional`]) practically never
//! moves. The collapsed update draws `z_j` from `p(z_j | everything except
//! β_j, γ_j)` and then redraws the pair, which leaves the same posterior
//! invariant and mixes.

pub mod diagnostics;
pub mod truncnorm;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HierarchicalPrior, Layout, StandardizedDataset};
use crate::seed::{rng_for, ChainRng};

/// Minimum effective sample size for `β_T` before a warning is logged.
pub const ESS_WARNING_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorUpdate {
    /// `z_j` drawn with `(β_j, γ_j)` marginalised, then the pair redrawn.
    #[default]
    Collapsed,
    /// `z_j` drawn from its full conditional given `(β_j, γ_j)`.
    Conditional,
}

/// Full state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// Coefficients in [`Layout`] order.
    pub nu: DVector<f64>,
    pub t_star: DVector<f64>,
    pub z: Vec<bool>,
    pub pi: DVector<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub indicator_update: IndicatorUpdate,
    #[serde(skip)]
    pub init: Option<LatentState>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 500,
            samples: 2500,
            thin: 1,
            seed: 0,
            indicator_update: IndicatorUpdate::Collapsed,
            init: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Coefficient slot inside one equation's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// `β_T`, `β_0` or `γ_0`: unit prior variance (times σ² on the outcome side).
    Fixed,
    /// Predictor `j`.
    Predictor(usize),
}

#[derive(Debug, Clone)]
struct Block {
    /// Positions in `ν`.
    idx: Vec<usize>,
    slots: Vec<Slot>,
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl Block {
    fn new(idx: Vec<usize>, slots: Vec<Slot>, x: DMatrix<f64>) -> Self {
        let gram = x.tr_mul(&x);
        Self { idx, slots, x, gram }
    }

    fn gather(&self, nu: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&k| nu[k]))
    }
}

/// Gibbs sampler bound to one dataset and one precise prior.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    layout: Layout,
    prior: HierarchicalPrior,
    y: DVector<f64>,
    t: Vec<bool>,
    x: DMatrix<f64>,
    col_sq: Vec<f64>,
    outcome: Block,
    xo_y: DVector<f64>,
    treatment: Option<Block>,
    /// Spike-and-slab selection active (`z`, `π` sampled).
    selection: bool,
    kept_beta: Vec<bool>,
    kept_gamma: Vec<bool>,
}

impl GibbsSampler {
    /// Full joint model with spike-and-slab selection.
    pub fn new(data: &StandardizedDataset, prior: &HierarchicalPrior) -> Result<Self> {
        let p = data.p();
        Self::build(data, prior, true, true, vec![true; p], vec![true; p])
    }

    /// Outcome equation only (no latent treatment utilities, no `γ`).
    pub fn outcome_only(data: &StandardizedDataset, prior: &HierarchicalPrior) -> Result<Self> {
        let p = data.p();
        Self::build(data, prior, false, true, vec![true; p], vec![false; p])
    }

    /// Slab-only model on a fixed support: excluded coefficients are
    /// removed from the design and stay exactly zero, no `z`/`π` updates.
    pub fn fixed_support(
        data: &StandardizedDataset,
        prior: &HierarchicalPrior,
        keep_beta: Vec<bool>,
        keep_gamma: Vec<bool>,
    ) -> Result<Self> {
        Self::build(data, prior, true, false, keep_beta, keep_gamma)
    }

    fn build(
        data: &StandardizedDataset,
        prior: &HierarchicalPrior,
        treatment_equation: bool,
        selection: bool,
        kept_beta: Vec<bool>,
        kept_gamma: Vec<bool>,
    ) -> Result<Self> {
        prior.validate()?;
        let n = data.n();
        let p = data.p();
        if n < 1 {
            return Err(Error::Degenerate("no observations".into()));
        }
        if prior.p() != p || kept_beta.len() != p || kept_gamma.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "prior/support vectors must have length p={p} (prior has {})",
                prior.p()
            )));
        }
        let layout = data.layout();
        let x = data.inner.x.clone();

        let mut o_idx = vec![layout.beta_t()];
        let mut o_slots = vec![Slot::Fixed];
        let mut o_cols = vec![data.outcome_treatment_column()];
        for j in (0..p).filter(|&j| kept_beta[j]) {
            o_idx.push(layout.beta(j));
            o_slots.push(Slot::Predictor(j));
            o_cols.push(x.column(j).into_owned());
        }
        if let Some(k) = layout.beta0() {
            o_idx.push(k);
            o_slots.push(Slot::Fixed);
            o_cols.push(DVector::from_element(n, 1.0));
        }
        let xo = DMatrix::from_columns(&o_cols);
        let outcome = Block::new(o_idx, o_slots, xo);
        let xo_y = outcome.x.tr_mul(&data.inner.y);

        let treatment = if treatment_equation {
            let mut idx = Vec::new();
            let mut slots = Vec::new();
            let mut cols = Vec::new();
            for j in (0..p).filter(|&j| kept_gamma[j]) {
                idx.push(layout.gamma(j));
                slots.push(Slot::Predictor(j));
                cols.push(x.column(j).into_owned());
            }
            if let Some(k) = layout.gamma0() {
                idx.push(k);
                slots.push(Slot::Fixed);
                cols.push(DVector::from_element(n, 1.0));
            }
            (!idx.is_empty()).then(|| Block::new(idx, slots, DMatrix::from_columns(&cols)))
        } else {
            None
        };
        let kept_gamma = if treatment_equation { kept_gamma } else { vec![false; p] };

        let col_sq = (0..p).map(|j| x.column(j).norm_squared()).collect();
        Ok(Self {
            layout,
            prior: prior.clone(),
            y: data.inner.y.clone(),
            t: data.inner.t.clone(),
            x,
            col_sq,
            outcome,
            xo_y,
            treatment,
            selection,
            kept_beta,
            kept_gamma,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn prior(&self) -> &HierarchicalPrior {
        &self.prior
    }

    pub fn has_treatment_equation(&self) -> bool {
        self.treatment.is_some()
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Starting point: zero coefficients, the empty model (every indicator
    /// in the slab for fixed-support chains),
    /// `π = q` and `σ²` at the reciprocal prior-mean precision.
    pub fn initial_state(&self) -> LatentState {
        let t_star = DVector::from_iterator(self.n(), self.t.iter().map(|&t| if t { 0.5 } else { -0.5 }));
        LatentState {
            nu: DVector::zeros(self.layout.dim()),
            t_star,
            // Selection chains start from the empty model; starting with
            // every predictor in needs far longer burn-in when p > n.
            z: vec![!self.selection; self.p()],
            pi: DVector::from_vec(self.prior.q.clone()),
            sigma2: self.prior.b / self.prior.a,
        }
    }

    fn tau_sq(&self, z: bool) -> f64 {
        let tau = if z { self.prior.tau1 } else { self.prior.tau0 };
        tau * tau
    }

    /// Prior variance of a block slot, before the `σ²` factor.
    fn slot_variance(&self, slot: Slot, state: &LatentState) -> f64 {
        match slot {
            Slot::Fixed => 1.0,
            Slot::Predictor(j) if self.selection => self.tau_sq(state.z[j]),
            Slot::Predictor(_) => self.tau_sq(true),
        }
    }

    fn block_precision(&self, block: &Block, state: &LatentState) -> Result<Cholesky<f64, Dyn>> {
        let mut a = block.gram.clone();
        for (k, &slot) in block.slots.iter().enumerate() {
            a[(k, k)] += 1.0 / self.slot_variance(slot, state);
        }
        Cholesky::new(a).ok_or_else(|| {
            Error::NumericalFailure("conditional precision of the coefficients is not positive definite".into())
        })
    }

    /// Linear predictor `X_T γ + γ_0` of the probit equation.
    pub fn treatment_index(&self, state: &LatentState) -> DVector<f64> {
        match &self.treatment {
            Some(b) => &b.x * b.gather(&state.nu),
            None => DVector::zeros(self.n()),
        }
    }

    /// Redraws every `T*_i` from `N(x_i γ + γ_0, 1)` truncated to the side
    /// selected by `T_i`.
    pub fn sample_latent_treatment<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) {
        if self.treatment.is_none() {
            return;
        }
        let eta = self.treatment_index(state);
        for i in 0..self.n() {
            state.t_star[i] = truncnorm::sample_signed(rng, eta[i], self.t[i]);
        }
    }

    /// Mean of the Gaussian full conditional of `ν`, in layout order.
    pub fn coefficient_conditional_mean(&self, state: &LatentState) -> Result<DVector<f64>> {
        let mut out = state.nu.clone();
        let chol = self.block_precision(&self.outcome, state)?;
        let m = chol.solve(&self.xo_y);
        for (k, &i) in self.outcome.idx.iter().enumerate() {
            out[i] = m[k];
        }
        if let Some(b) = &self.treatment {
            let chol = self.block_precision(b, state)?;
            let m = chol.solve(&b.x.tr_mul(&state.t_star));
            for (k, &i) in b.idx.iter().enumerate() {
                out[i] = m[k];
            }
        }
        Ok(out)
    }

    /// Draws `ν` from `N(A⁻¹ZᵀΣ⁻¹W, A⁻¹)`. The precision `A` is block
    /// diagonal, so each equation is drawn with its own factorisation.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) -> Result<()> {
        let draw = |block: &Block, rhs: &DVector<f64>, scale: f64, rng: &mut R| -> Result<DVector<f64>> {
            let chol = self.block_precision(block, state)?;
            let mean = chol.solve(rhs);
            let xi = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| StandardNormal.sample(rng)));
            let noise = chol
                .l()
                .tr_solve_lower_triangular(&xi)
                .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
            let out = mean + noise * scale;
            if out.iter().all(|v| v.is_finite()) {
                Ok(out)
            } else {
                Err(Error::NumericalFailure("non-finite coefficient draw".into()))
            }
        };
        let outcome = draw(&self.outcome, &self.xo_y, state.sigma2.sqrt(), rng)?;
        let treatment = match &self.treatment {
            Some(b) => Some((b, draw(b, &b.x.tr_mul(&state.t_star), 1.0, rng)?)),
            None => None,
        };
        for (k, &i) in self.outcome.idx.iter().enumerate() {
            state.nu[i] = outcome[k];
        }
        if let Some((b, v)) = treatment {
            for (k, &i) in b.idx.iter().enumerate() {
                state.nu[i] = v[k];
            }
        }
        Ok(())
    }

    /// `P(z_j = 1 | β_j, γ_j, π_j, σ²)`, evaluated in log space.
    pub fn indicator_probability(&self, state: &LatentState, j: usize) -> f64 {
        let log_density = |z: bool| -> f64 {
            let t2 = self.tau_sq(z);
            let beta = state.nu[self.layout.beta(j)];
            let mut ld = -0.5 * (t2 * state.sigma2).ln() - 0.5 * beta * beta / (t2 * state.sigma2);
            if self.kept_gamma[j] {
                let gamma = state.nu[self.layout.gamma(j)];
                ld += -0.5 * t2.ln() - 0.5 * gamma * gamma / t2;
            }
            ld
        };
        let pi = state.pi[j];
        let diff = log_density(true) - log_density(false);
        if diff == 0.0 {
            return pi;
        }
        inv_logit(pi.ln() - (1.0 - pi).ln() + diff)
    }

    /// Draws each `z_j` from its full conditional given `(β_j, γ_j)`.
    pub fn sample_mixture_indicators<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) {
        if !self.selection {
            return;
        }
        for j in 0..self.p() {
            let r = self.indicator_probability(state, j);
            state.z[j] = rng.random::<f64>() < r;
        }
    }

    /// Joint draw of `(z_j, β_j, γ_j)` for each `j` in turn, with the
    /// coefficient pair integrated out of the indicator update.
    pub fn sample_indicators_collapsed<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) {
        if !self.selection {
            return;
        }
        let mut r = &self.y - &self.outcome.x * self.outcome.gather(&state.nu);
        let mut e = self.treatment.as_ref().map(|b| &state.t_star - &b.x * b.gather(&state.nu));
        let sigma2 = state.sigma2;
        let (t0, t1) = (self.tau_sq(false), self.tau_sq(true));
        for j in 0..self.p() {
            let xj = self.x.column(j);
            let s = self.col_sq[j];
            let bi = self.layout.beta(j);
            r.axpy(state.nu[bi], &xj, 1.0);
            let xr = xj.dot(&r);
            // log Bayes factor of N(0, t2 * scale) against a point mass, for one coefficient.
            let log_bf = |t2: f64, xv: f64, scale: f64| -> f64 {
                let d = 1.0 + t2 * s;
                -0.5 * d.ln() + 0.5 * xv * xv * t2 / (scale * d)
            };
            let mut lo = state.pi[j].ln() - (1.0 - state.pi[j]).ln() + log_bf(t1, xr, sigma2) - log_bf(t0, xr, sigma2);
            let gi = self.kept_gamma[j].then(|| self.layout.gamma(j));
            let mut xe = 0.0;
            if let (Some(gi), Some(e)) = (gi, e.as_mut()) {
                e.axpy(state.nu[gi], &xj, 1.0);
                xe = xj.dot(e);
                lo += log_bf(t1, xe, 1.0) - log_bf(t0, xe, 1.0);
            }
            let z = rng.random::<f64>() < inv_logit(lo);
            state.z[j] = z;
            let t2 = if z { t1 } else { t0 };
            let c = t2 / (1.0 + t2 * s);
            let xi: f64 = StandardNormal.sample(rng);
            let beta = c * xr + (sigma2 * c).sqrt() * xi;
            state.nu[bi] = beta;
            r.axpy(-beta, &xj, 1.0);
            if let (Some(gi), Some(e)) = (gi, e.as_mut()) {
                let xi: f64 = StandardNormal.sample(rng);
                let gamma = c * xe + c.sqrt() * xi;
                state.nu[gi] = gamma;
                e.axpy(-gamma, &xj, 1.0);
            }
        }
    }

    /// `π_j ~ Beta(s q_j + z_j, s (1 − q_j) + 1 − z_j)`.
    pub fn sample_inclusion_probs<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) {
        if !self.selection {
            return;
        }
        let s = self.prior.s;
        for j in 0..self.p() {
            let z = f64::from(u8::from(state.z[j]));
            let q = self.prior.q[j];
            let dist = Beta::new(s * q + z, s * (1.0 - q) + 1.0 - z).expect("positive beta parameters");
            // Keep π strictly inside (0, 1) so its logit stays finite.
            state.pi[j] = dist.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        }
    }

    /// Shape and rate of the Gamma full conditional of `1/σ²`.
    pub fn noise_precision_conditional(&self, state: &LatentState) -> (f64, f64) {
        let nu_o = self.outcome.gather(&state.nu);
        let resid = &self.y - &self.outcome.x * &nu_o;
        let quad: f64 = self
            .outcome
            .slots
            .iter()
            .zip(nu_o.iter())
            .map(|(&slot, &v)| v * v / self.slot_variance(slot, state))
            .sum();
        let shape = self.prior.a + 0.5 * (self.n() + self.outcome.idx.len()) as f64;
        let rate = self.prior.b + 0.5 * (resid.norm_squared() + quad);
        (shape, rate)
    }

    pub fn sample_noise_precision<R: Rng + ?Sized>(&self, state: &mut LatentState, rng: &mut R) {
        let (shape, rate) = self.noise_precision_conditional(state);
        let precision = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng);
        state.sigma2 = 1.0 / precision.max(f64::MIN_POSITIVE);
    }

    /// One full sweep in the fixed order `(T*, ν, z, π, σ²)`.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut LatentState, update: IndicatorUpdate, rng: &mut R) -> Result<()> {
        self.sample_latent_treatment(state, rng);
        self.sample_coefficients(state, rng)?;
        match update {
            IndicatorUpdate::Collapsed => self.sample_indicators_collapsed(state, rng),
            IndicatorUpdate::Conditional => self.sample_mixture_indicators(state, rng),
        }
        self.sample_inclusion_probs(state, rng);
        self.sample_noise_precision(state, rng);
        Ok(())
    }

    /// Runs `burn_in + samples * thin` sweeps and keeps every `thin`-th
    /// post-burn-in state.
    pub fn run(&self, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
        cfg.validate()?;
        let mut rng = rng_for(cfg.seed, &[]);
        self.run_with_rng(cfg, &mut rng)
    }

    pub fn run_with_rng(&self, cfg: &SamplerConfig, rng: &mut ChainRng) -> Result<PosteriorDraws> {
        cfg.validate()?;
        let mut state = cfg.init.clone().unwrap_or_else(|| self.initial_state());
        if state.nu.len() != self.layout.dim() || state.z.len() != self.p() || state.t_star.len() != self.n() {
            return Err(Error::DimensionMismatch("initial state does not match the model".into()));
        }
        for _ in 0..cfg.burn_in {
            self.sweep(&mut state, cfg.indicator_update, rng)?;
        }
        let m = cfg.samples;
        let p = self.p();
        let mut draws = PosteriorDraws {
            layout: self.layout,
            prior: self.prior.clone(),
            nu: DMatrix::zeros(m, self.layout.dim()),
            pi: self.selection.then(|| DMatrix::zeros(m, p)),
            z: self.selection.then(|| DMatrix::zeros(m, p)),
            sigma2: DVector::zeros(m),
            kept_beta: self.kept_beta.clone(),
            kept_gamma: self.kept_gamma.clone(),
            treatment_equation: self.treatment.is_some(),
        };
        for row in 0..m {
            for _ in 0..cfg.thin {
                self.sweep(&mut state, cfg.indicator_update, rng)?;
            }
            draws.nu.set_row(row, &state.nu.transpose());
            if let Some(pi) = draws.pi.as_mut() {
                pi.set_row(row, &state.pi.transpose());
            }
            if let Some(z) = draws.z.as_mut() {
                for j in 0..p {
                    z[(row, j)] = f64::from(u8::from(state.z[j]));
                }
            }
            draws.sigma2[row] = state.sigma2;
        }
        let ess = diagnostics::effective_sample_size(&draws.column(self.layout.beta_t()));
        if ess < ESS_WARNING_THRESHOLD {
            log::warn!("effective sample size of beta_T is {ess:.1} (< {ESS_WARNING_THRESHOLD})");
        }
        Ok(draws)
    }
}

fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the full selection model for one prior.
pub fn run_chain(data: &StandardizedDataset, prior: &HierarchicalPrior, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    GibbsSampler::new(data, prior)?.run(cfg)
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub layout: Layout,
    pub prior: HierarchicalPrior,
    /// `m × dim` coefficient draws in layout order.
    pub nu: DMatrix<f64>,
    pub pi: Option<DMatrix<f64>>,
    /// Indicator draws as 0.0 / 1.0.
    pub z: Option<DMatrix<f64>>,
    pub sigma2: DVector<f64>,
    pub kept_beta: Vec<bool>,
    pub kept_gamma: Vec<bool>,
    pub treatment_equation: bool,
}

/// Posterior mean, spread and equal-tailed 95% interval of one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ess: f64,
    pub mcse: f64,
}

impl ScalarSummary {
    pub fn from_draws(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ess = diagnostics::effective_sample_size(xs);
        Self {
            mean,
            sd,
            median: diagnostics::quantile(&sorted, 0.5),
            ci_lo: diagnostics::quantile(&sorted, 0.025),
            ci_hi: diagnostics::quantile(&sorted, 0.975),
            ess,
            mcse: sd / ess.sqrt(),
        }
    }
}

/// Per-chain expectations used by the sensitivity analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Common prior inclusion mean of the chain.
    pub q: f64,
    pub draws: usize,
    pub beta_t: ScalarSummary,
    /// `E(β_j | W)`.
    pub beta_mean: Vec<f64>,
    /// `E(γ_j | W)`.
    pub gamma_mean: Vec<f64>,
    /// `E(π_j | W)`, Rao-Blackwellised.
    pub inclusion: Vec<f64>,
    pub sigma2_mean: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.nu.column(k).iter().copied().collect()
    }

    pub fn beta_t(&self) -> Vec<f64> {
        self.column(self.layout.beta_t())
    }

    pub fn coefficient_means(&self) -> DVector<f64> {
        self.nu.row_mean().transpose()
    }

    /// `E(π_j | W)` by averaging the Beta conditional mean
    /// `(s q_j + z_j) / (s + 1)` over the indicator draws. `None` for
    /// fixed-support chains.
    pub fn inclusion_means(&self) -> Option<Vec<f64>> {
        let z = self.z.as_ref()?;
        let s = self.prior.s;
        Some(
            (0..self.layout.p)
                .map(|j| {
                    let zbar = z.column(j).mean();
                    (s * self.prior.q[j] + zbar) / (s + 1.0)
                })
                .collect(),
        )
    }

    /// Plain Monte-Carlo average of the `π_j` draws.
    pub fn pi_means(&self) -> Option<Vec<f64>> {
        self.pi.as_ref().map(|pi| (0..pi.ncols()).map(|j| pi.column(j).mean()).collect())
    }

    pub fn summary(&self) -> PosteriorSummary {
        let means = self.coefficient_means();
        let p = self.layout.p;
        let q = self.prior.q.iter().sum::<f64>() / p.max(1) as f64;
        PosteriorSummary {
            q,
            draws: self.len(),
            beta_t: ScalarSummary::from_draws(&self.beta_t()),
            beta_mean: (0..p).map(|j| means[self.layout.beta(j)]).collect(),
            gamma_mean: (0..p).map(|j| means[self.layout.gamma(j)]).collect(),
            inclusion: self.inclusion_means().unwrap_or_else(|| vec![f64::NAN; p]),
            sigma2_mean: self.sigma2.mean(),
        }
    }

    /// Column labels of the draw dump; coefficients outside the support are
    /// omitted.
    fn present_columns(&self) -> Vec<(usize, String)> {
        let labels = self.layout.labels();
        let l = self.layout;
        (0..l.dim())
            .filter(|&k| {
                if k >= 1 && k <= l.p {
                    self.kept_beta[k - 1]
                } else if k >= l.outcome_dim() && k < l.outcome_dim() + l.p {
                    self.kept_gamma[k - l.outcome_dim()]
                } else if Some(k) == l.gamma0() {
                    self.treatment_equation
                } else {
                    true
                }
            })
            .map(|k| (k, labels[k].clone()))
            .collect()
    }

    /// Writes one row per retained draw:
    /// `beta_T, beta_1..p, beta_0?, gamma_1..p, gamma_0?, pi_1..p, sigma2`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let cols = self.present_columns();
        let mut header: Vec<String> = cols.iter().map(|(_, s)| s.clone()).collect();
        if self.pi.is_some() {
            header.extend((1..=self.layout.p).map(|j| format!("pi_{j}")));
        }
        header.push("sigma2".into());
        wtr.write_record(&header)?;
        for row in 0..self.len() {
            let mut rec: Vec<String> = cols.iter().map(|&(k, _)| self.nu[(row, k)].to_string()).collect();
            if let Some(pi) = &self.pi {
                rec.extend(pi.row(row).iter().map(|v| v.to_string()));
            }
            rec.push(self.sigma2[row].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
