//! Small statistical toolbox: order-stable reductions, quantiles and
//! binomial confidence intervals.

use statrs::distribution::{Beta, ContinuousCDF};

/// Pairwise (cascade) summation. Associative by construction, so ensemble
/// reductions give the same bits regardless of how the work was divided
/// across threads, as long as the element order is fixed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let devs: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&devs) / (xs.len() as f64 - 1.0);
    (m, var)
}

/// Standard error of the mean.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    let (_, var) = mean_var(xs);
    (var / xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile of a sorted slice, `q in [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Two-sided Clopper-Pearson interval for a binomial proportion.
pub fn clopper_pearson(hits: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(n > 0 && hits <= n);
    let alpha = 1.0 - confidence;
    let x = hits as f64;
    let nf = n as f64;
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(x, nf - x + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if hits == n {
        1.0
    } else {
        Beta::new(x + 1.0, nf - x).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// One-sided Clopper-Pearson upper bound; the zero-hit substitute for
/// `log 0` in tail tables.
pub fn clopper_pearson_upper(hits: u64, n: u64, confidence: f64) -> f64 {
    assert!(n > 0 && hits <= n);
    if hits == n {
        return 1.0;
    }
    let x = hits as f64;
    let nf = n as f64;
    Beta::new(x + 1.0, nf - x).unwrap().inverse_cdf(confidence)
}
