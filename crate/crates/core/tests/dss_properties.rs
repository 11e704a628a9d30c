mod support;

use proptest::prelude::*;
use rbce::dss::{adaptive_lasso_fit, kkt_residual, lasso_path, LassoOptions, PathOptions};
use support::{brute_force_lasso, lasso_problem};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn coordinate_descent_meets_kkt(seed in any::<u64>(), n in 5usize..40, p in 1usize..25) {
        let (x, t, w, lambda) = lasso_problem(seed, n, p);
        let fit = adaptive_lasso_fit(&x, &t, &w, lambda, LassoOptions::default()).unwrap();
        prop_assert!(kkt_residual(&x, &t, &w, lambda, &fit.coef) <= 1e-8);
    }

    #[test]
    fn matches_sign_pattern_enumeration(seed in any::<u64>(), n in 6usize..30, p in 1usize..=3) {
        let (x, t, w, lambda) = lasso_problem(seed, n, p);
        let fit = adaptive_lasso_fit(&x, &t, &w, lambda, LassoOptions::default()).unwrap();
        let (best, _) = brute_force_lasso(&x, &t, &w, lambda);
        for j in 0..p {
            prop_assert!((fit.coef[j] - best[j]).abs() <= 1e-6, "{} vs {}", fit.coef[j], best[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn path_is_monotone_in_penalty(seed in any::<u64>(), n in 10usize..30, p in 2usize..12) {
        let (x, t, w, _) = lasso_problem(seed, n, p);
        let path = lasso_path(&x, &t, &w, PathOptions { n_lambda: 25, ..PathOptions::default() }).unwrap();
        for k in 1..path.lambdas.len() {
            prop_assert!(path.lambdas[k] < path.lambdas[k - 1]);
            // A smaller penalty never fits worse.
            prop_assert!(path.rss[k] <= path.rss[k - 1] + 1e-9);
        }
        prop_assert!(path.coefs[0].iter().all(|&b| b == 0.0));
        prop_assert!(path.rss_ls <= path.rss[path.rss.len() - 1] + 1e-9);
    }
}
