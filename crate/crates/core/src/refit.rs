//! Slab-only refit on a chosen support.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dss::DssResult;
use crate::model::{HierarchicalPrior, StandardizedDataset};
use crate::sampler::{GibbsSampler, PosteriorDraws, SamplerConfig};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// Zero-based predictor indices kept in each equation. `β_T` and whatever
/// intercepts the preprocessing retained are always in.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefitSpec {
    pub keep_beta: Vec<usize>,
    pub keep_gamma: Vec<usize>,
}

impl RefitSpec {
    pub fn new(mut keep_beta: Vec<usize>, mut keep_gamma: Vec<usize>) -> Self {
        keep_beta.sort_unstable();
        keep_beta.dedup();
        keep_gamma.sort_unstable();
        keep_gamma.dedup();
        Self { keep_beta, keep_gamma }
    }

    pub fn everything(p: usize) -> Self {
        Self::new((0..p).collect(), (0..p).collect())
    }

    /// Predictors the sparse fits kept at one grid prior.
    pub fn from_dss(dss: &DssResult, q_index: usize) -> Result<Self> {
        let entry = dss.per_q.get(q_index).ok_or_else(|| Error::InvalidConfig(format!("no grid point {q_index} in DSS result")))?;
        Ok(Self::new(entry.outcome.selected(), entry.treatment.selected()))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if let Some(j) = self.keep_beta.iter().chain(&self.keep_gamma).find(|&&j| j >= p) {
            return Err(Error::InvalidConfig(format!("refit index {} exceeds the {p} predictors", j + 1)));
        }
        Ok(())
    }

    fn masks(&self, p: usize) -> (Vec<bool>, Vec<bool>) {
        let mut b = vec![false; p];
        let mut g = vec![false; p];
        self.keep_beta.iter().for_each(|&j| b[j] = true);
        self.keep_gamma.iter().for_each(|&j| g[j] = true);
        (b, g)
    }
}

/// Runs the slab-only model: kept coefficients get `N(0, τ1² σ²)` /
/// `N(0, τ1²)` priors, the rest are removed from the design.
pub fn refit(data: &StandardizedDataset, spec: &RefitSpec, prior: &HierarchicalPrior, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    spec.validate(data.p())?;
    let (b, g) = spec.masks(data.p());
    GibbsSampler::fixed_support(data, prior, b, g)?.run(cfg)
}

/// One refit per grid prior, each on the support its sparse fits kept.
pub fn robust_refit(
    data: &StandardizedDataset,
    dss: &DssResult,
    prior: &HierarchicalPrior,
    cfg: &SamplerConfig,
) -> Result<Vec<(f64, PosteriorDraws)>> {
    (0..dss.per_q.len())
        .into_par_iter()
        .map(|k| {
            let spec = RefitSpec::from_dss(dss, k)?;
            let q = dss.per_q[k].q;
            let chain = SamplerConfig { seed: derive_seed(cfg.seed, &[q.to_bits()]), ..cfg.clone() };
            Ok((q, refit(data, &spec, prior, &chain)?))
        })
        .collect()
}
