mod support;

use proptest::prelude::*;
use rbce::dss::{active_from_inclusion, dss_summarize, ActiveSets, DssOptions};
use rbce::model::HierarchicalPrior;
use rbce::robust::{classify_predictor, robust_credible_interval, sensitivity_fit, Decision, PriorSet};
use rbce::sampler::{GibbsSampler, SamplerConfig};
use rbce::seed::derive_seed;
use support::confounded;

fn short_chain(seed: u64) -> SamplerConfig {
    SamplerConfig { burn_in: 100, samples: 300, seed, ..SamplerConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bounds_decisions_and_sets_agree(seed in 0u64..1_000, lo in 0.05f64..0.5, width in 0.01f64..0.4, g in 2usize..6) {
        let data = confounded(seed, 30, 6);
        let prior = HierarchicalPrior::with_common_q(6, 0.3).unwrap();
        let set = PriorSet::new(lo, (lo + width).min(0.95), g).unwrap();
        let fit = sensitivity_fit(&data, &prior, &set, &short_chain(seed)).unwrap();
        for (j, rec) in fit.predictors.iter().enumerate() {
            prop_assert!(rec.e_lo <= rec.e_hi);
            prop_assert_eq!(rec.decision, classify_predictor(rec.e_lo, rec.e_hi));
            for s in &fit.per_q {
                prop_assert!(rec.e_lo <= s.inclusion[j] && s.inclusion[j] <= rec.e_hi);
                prop_assert!(rec.beta_lo <= s.beta_mean[j] && s.beta_mean[j] <= rec.beta_hi);
            }
        }
        // S_* ⊆ S(q) ⊆ S^* for every grid prior.
        let sets = ActiveSets::from_summaries(&fit.per_q);
        prop_assert_eq!(&sets.s_lower, &fit.s_lower);
        prop_assert_eq!(&sets.s_star, &fit.s_star);
        for (_, s_q) in &sets.per_q {
            prop_assert!(fit.s_lower.iter().all(|j| s_q.contains(j)));
            prop_assert!(s_q.iter().all(|j| fit.s_star.contains(j)));
        }
        let abstain = fit.count(Decision::Abstain);
        prop_assert_eq!(fit.s_star.len() - fit.s_lower.len(), abstain);
        // Envelope of the causal effect.
        let ce = fit.causal_effect;
        for s in &fit.per_q {
            prop_assert!(ce.mean_lo <= s.beta_t.mean && s.beta_t.mean <= ce.mean_hi);
            prop_assert!(ce.ci_lo <= s.beta_t.ci_lo && s.beta_t.ci_hi <= ce.ci_hi);
        }
    }

    #[test]
    fn coarse_grid_envelope_sits_inside_fine_one(seed in 0u64..1_000, lo in 0.05f64..0.4, width in 0.05f64..0.4) {
        let data = confounded(seed, 25, 5);
        let prior = HierarchicalPrior::with_common_q(5, 0.3).unwrap();
        let hi = (lo + width).min(0.9);
        let cfg = short_chain(seed);
        let coarse = sensitivity_fit(&data, &prior, &PriorSet::new(lo, hi, 3).unwrap(), &cfg).unwrap();
        let fine = sensitivity_fit(&data, &prior, &PriorSet::new(lo, hi, 11).unwrap(), &cfg).unwrap();
        for (c, f) in coarse.predictors.iter().zip(&fine.predictors) {
            prop_assert!(f.e_lo <= c.e_lo && c.e_hi <= f.e_hi);
        }
        prop_assert!(fine.causal_effect.mean_lo <= coarse.causal_effect.mean_lo);
        prop_assert!(coarse.causal_effect.mean_hi <= fine.causal_effect.mean_hi);
    }
}

proptest! {
    #[test]
    fn envelope_contains_every_interval(iv in proptest::collection::vec((-10.0f64..10.0, 0.0f64..5.0), 1..20)) {
        let intervals: Vec<(f64, f64)> = iv.iter().map(|&(a, w)| (a, a + w)).collect();
        let (lo, hi) = robust_credible_interval(&intervals).unwrap();
        prop_assert!(intervals.iter().all(|&(a, b)| lo <= a && b <= hi));
        prop_assert!(intervals.iter().any(|&(a, _)| a == lo));
        prop_assert!(intervals.iter().any(|&(_, b)| b == hi));
    }

    #[test]
    fn decision_rule_partitions(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let d = classify_predictor(lo, hi);
        prop_assert_eq!(d == Decision::Select, lo >= 0.5);
        prop_assert_eq!(d == Decision::Reject, hi < 0.5);
        let set = active_from_inclusion(&[lo, hi]);
        prop_assert_eq!(set.contains(&0), lo >= 0.5);
    }
}

#[test]
fn singleton_set_is_a_single_chain() {
    let data = confounded(5, 30, 6);
    let prior = HierarchicalPrior::with_common_q(6, 0.3).unwrap();
    let cfg = short_chain(44);
    let fit = sensitivity_fit(&data, &prior, &PriorSet::singleton(0.25).unwrap(), &cfg).unwrap();
    assert_eq!(fit.per_q.len(), 1);
    let chain = SamplerConfig { seed: derive_seed(cfg.seed, &[0.25f64.to_bits()]), ..cfg };
    let direct = GibbsSampler::new(&data, &prior.at_common_q(0.25).unwrap()).unwrap().run(&chain).unwrap().summary();
    assert_eq!(fit.per_q[0], direct);
    for (j, rec) in fit.predictors.iter().enumerate() {
        assert_eq!(rec.e_lo, rec.e_hi);
        assert_eq!(rec.e_lo, direct.inclusion[j]);
    }
    assert_eq!(fit.causal_effect.mean_lo, fit.causal_effect.mean_hi);
    assert_eq!((fit.causal_effect.ci_lo, fit.causal_effect.ci_hi), (direct.beta_t.ci_lo, direct.beta_t.ci_hi));
    assert_eq!(fit.count(Decision::Abstain), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let data = confounded(6, 30, 6);
    let prior = HierarchicalPrior::with_common_q(6, 0.3).unwrap();
    let set = PriorSet::new(0.1, 0.4, 4).unwrap();
    let run = || {
        let fit = sensitivity_fit(&data, &prior, &set, &short_chain(3)).unwrap();
        let mut csv = Vec::new();
        dss_summarize(&fit, &data, DssOptions::default()).unwrap().write_csv(&mut csv).unwrap();
        (fit.to_json().unwrap(), csv)
    };
    assert_eq!(run(), run());
}
