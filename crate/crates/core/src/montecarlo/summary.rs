//! Small descriptive statistics over replication values.

use crate::numerics::NeumaierSum;

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / n;
    (mean, (variance(values) / n).sqrt())
}

/// Unbiased sample variance (zero for fewer than two values).
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / n;
    values.iter().map(|x| (x - mean) * (x - mean)).collect::<NeumaierSum>().value() / (n - 1.0)
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range.
pub fn median_and_iqr(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25))
}
