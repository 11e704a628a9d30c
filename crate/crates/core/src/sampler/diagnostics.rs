//! Effective sample size and Monte-Carlo standard errors.

/// Effective sample size by Geyer's initial monotone sequence estimator.
///
/// Returns `m` for a constant chain. Antithetic chains can exceed `m`; the
/// estimate is capped at `3m`.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 4 {
        return m as f64;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let var0 = centered.iter().map(|x| x * x).sum::<f64>() / m as f64;
    if var0 <= 0.0 || !var0.is_finite() {
        return m as f64;
    }
    let autocov = |lag: usize| -> f64 {
        centered[..m - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / m as f64
    };
    // Γ_k = ρ(2k) + ρ(2k+1), truncated at the first non-positive pair and
    // forced monotone.
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < m {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / var0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / 3.0);
    (m as f64 / tau).min(3.0 * m as f64)
}

/// Monte-Carlo standard error of the sample mean of `xs`.
pub fn mcse(xs: &[f64]) -> f64 {
    let m = xs.len() as f64;
    if m < 2.0 {
        return f64::INFINITY;
    }
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (var / effective_sample_size(xs)).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
