//! Shared fixtures and brute-force references for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rbce::dss::lasso_objective;
use rbce::model::{standardize, Dataset, HierarchicalPrior, StandardizeOptions, StandardizedDataset};
use rbce::sampler::PosteriorDraws;

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `n = 8`, `p = 2` data with both treatment groups present and random
/// inclusion means.
pub fn tiny_instance(seed: u64) -> (StandardizedDataset, HierarchicalPrior) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (8, 2);
    let x = normal_matrix(&mut rng, n, p);
    let mut t: Vec<bool> = (0..n).map(|i| x[(i, 0)] + 0.7 * rng.sample::<f64, _>(StandardNormal) > 0.0).collect();
    t[0] = true;
    t[1] = false;
    let y = DVector::from_fn(n, |i, _| {
        2.0 * f64::from(u8::from(t[i])) + x[(i, 0)] - 0.3 * x[(i, 1)] + 0.5 * rng.sample::<f64, _>(StandardNormal)
    });
    let data = standardize(&Dataset::from_parts(y, t, x).unwrap(), StandardizeOptions::default()).unwrap();
    let q = vec![rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)];
    let prior = HierarchicalPrior::new(0.05, 1.0, 3.0, 1.0, 1.0, q).unwrap();
    (data, prior)
}

/// Moderate-size data with a few real confounders.
pub fn confounded(seed: u64, n: usize, p: usize) -> StandardizedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = normal_matrix(&mut rng, n, p);
    let t: Vec<bool> = (0..n).map(|i| x[(i, 0)] - x[(i, 1)] + rng.sample::<f64, _>(StandardNormal) > 0.0).collect();
    let y = DVector::from_fn(n, |i, _| {
        2.0 * f64::from(u8::from(t[i])) + x[(i, 0)] + 0.8 * x[(i, 2)] + 0.3 * rng.sample::<f64, _>(StandardNormal)
    });
    standardize(&Dataset::from_parts(y, t, x).unwrap(), StandardizeOptions::default()).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-draw Rao-Blackwellised inclusion series `(s q + z) / (s + 1)`.
pub fn inclusion_series(draws: &PosteriorDraws, j: usize) -> Vec<f64> {
    let (s, q) = (draws.prior.s, draws.prior.q[j]);
    draws.z.as_ref().unwrap().column(j).iter().map(|z| (s * q + z) / (s + 1.0)).collect()
}

/// Global minimiser of the weighted lasso by enumerating supports and sign
/// patterns. Each candidate solves the stationarity equations on its
/// support and is kept only if its signs agree with the pattern.
pub fn brute_force_lasso(x: &DMatrix<f64>, t: &DVector<f64>, w: &[f64], lambda: f64) -> (DVector<f64>, f64) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut best = DVector::zeros(p);
    let mut best_obj = lasso_objective(x, t, w, lambda, &best);
    for mask in 1usize..(1 << p) {
        let support: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
        let xs = x.select_columns(&support);
        let Some(gram_inv) = (xs.transpose() * &xs).try_inverse() else { continue };
        let xt = xs.transpose() * t;
        for signs in 0usize..(1 << support.len()) {
            let s: Vec<f64> = (0..support.len()).map(|k| if signs >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let rhs = DVector::from_fn(support.len(), |k, _| xt[k] - 0.5 * n as f64 * lambda * w[support[k]] * s[k]);
            let b = &gram_inv * rhs;
            if b.iter().zip(&s).any(|(bk, sk)| bk * sk <= 0.0) {
                continue;
            }
            let mut full = DVector::zeros(p);
            for (k, &j) in support.iter().enumerate() {
                full[j] = b[k];
            }
            let obj = lasso_objective(x, t, w, lambda, &full);
            if obj < best_obj {
                best_obj = obj;
                best = full;
            }
        }
    }
    (best, best_obj)
}

/// Random weighted lasso problem: design, target, weights and a penalty
/// spread over `(0, λ_max]`.
pub fn lasso_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = normal_matrix(&mut rng, n, p);
    let beta = DVector::from_fn(p, |j, _| if j < 3 { rng.random_range(-2.0..2.0) } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
    let t = &x * beta + noise;
    let w: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..3.0)).collect();
    let lmax = rbce::dss::lambda_max(&x, &t, &w);
    let lambda = lmax * rng.random_range(0.01f64..1.0).powi(2);
    (x, t, w, lambda)
}
