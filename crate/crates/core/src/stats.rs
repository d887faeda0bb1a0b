//! Small sample-statistics helpers used by the simulation checks.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// Splits `n` consecutive items into `batches` contiguous index ranges of
/// (nearly) equal size.
pub fn batch_ranges(n: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let batches = batches.clamp(1, n.max(1));
    (0..batches).map(|b| (b * n / batches)..((b + 1) * n / batches)).collect()
}

/// Batch-means standard error of a statistic computed over a correlated
/// sequence: the statistic is evaluated on each of `batches` contiguous
/// batches and the standard error of their average is returned.
pub fn batch_means_se<F>(n: usize, batches: usize, stat: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64,
{
    let values: Vec<f64> = batch_ranges(n, batches).into_iter().map(stat).collect();
    (variance(&values) / values.len() as f64).sqrt()
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
