use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rbce::model::{standardize, Dataset, HierarchicalPrior, StandardizeOptions, StandardizedDataset};
use rbce::oracle::{oracle_outcome_posterior, OutcomeProblem, QuadratureOptions};
use rbce::refit::{refit, RefitSpec};
use rbce::sampler::diagnostics::mcse;
use rbce::sampler::SamplerConfig;

fn data(seed: u64, n: usize, p: usize) -> StandardizedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let t: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
    let y = DVector::from_fn(n, |i, _| 1.5 * f64::from(u8::from(t[i])) + x[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal));
    standardize(&Dataset::from_parts(y, t, x).unwrap(), StandardizeOptions::default()).unwrap()
}

fn cfg() -> SamplerConfig {
    SamplerConfig { burn_in: 500, samples: 20_000, seed: 17, ..SamplerConfig::default() }
}

#[test]
fn empty_support_is_conjugate_treatment_regression() {
    let d = data(1, 12, 3);
    let prior = HierarchicalPrior::with_common_q(3, 0.5).unwrap();
    let draws = refit(&d, &RefitSpec::default(), &prior, &cfg()).unwrap();
    let tc = d.outcome_treatment_column();
    let exact = tc.dot(&d.inner.y) / (tc.norm_squared() + 1.0);
    let bt = draws.beta_t();
    let got = bt.iter().sum::<f64>() / bt.len() as f64;
    assert!((got - exact).abs() <= 4.0 * mcse(&bt), "{got} vs {exact}");
}

#[test]
fn full_support_matches_slab_only_enumeration() {
    let d = data(2, 10, 2);
    let prior = HierarchicalPrior::new(1e-6, 1.0, 5.0, 1.0, 1.0, vec![0.4, 0.4]).unwrap();
    let draws = refit(&d, &RefitSpec::everything(2), &prior, &cfg()).unwrap();
    let slab = HierarchicalPrior { tau0: prior.tau1, ..prior.clone() };
    let exact = oracle_outcome_posterior(&OutcomeProblem::from_data(&d), &slab, QuadratureOptions::default()).unwrap();
    let l = draws.layout;
    let checks = [(l.beta_t(), exact.fixed_mean[0]), (l.beta(0), exact.beta_mean[0]), (l.beta(1), exact.beta_mean[1])];
    for (k, want) in checks {
        let c = draws.column(k);
        let got = c.iter().sum::<f64>() / c.len() as f64;
        assert!((got - want).abs() <= 4.0 * mcse(&c), "slot {k}: {got} vs {want}");
    }
}

#[test]
fn excluded_coefficients_stay_zero() {
    let d = data(3, 15, 4);
    let prior = HierarchicalPrior::with_common_q(4, 0.3).unwrap();
    let spec = RefitSpec::new(vec![0, 2], vec![1]);
    let draws = refit(&d, &spec, &prior, &SamplerConfig { samples: 200, burn_in: 50, ..cfg() }).unwrap();
    let l = draws.layout;
    for j in [1, 3] {
        assert!(draws.column(l.beta(j)).iter().all(|&v| v == 0.0));
    }
    for j in [0, 2, 3] {
        assert!(draws.column(l.gamma(j)).iter().all(|&v| v == 0.0));
    }
    assert!(draws.column(l.beta(0)).iter().any(|&v| v != 0.0));
    assert!(draws.z.is_none());
}

#[test]
fn out_of_range_support_is_rejected() {
    let d = data(4, 10, 2);
    let prior = HierarchicalPrior::with_common_q(2, 0.3).unwrap();
    assert!(refit(&d, &RefitSpec::new(vec![2], vec![]), &prior, &cfg()).is_err());
}
