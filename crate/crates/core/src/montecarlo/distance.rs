//! Kolmogorov–Smirnov distances and empirical tail slopes.

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F̂(x) − F(x)|` for an analytic reference CDF.
///
/// Returns 0 for an empty sample.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let v = sorted(values);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// `sup_x |F̂_a(x) − F̂_b(x)|`, with ties handled by stepping past equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Tail of the Kolmogorov distribution, `P[K > λ] = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of the two-sample KS statistic, with Stephens' small-sample correction.
pub fn ks_two_sample_p_value(a: &[f64], b: &[f64]) -> f64 {
    let d = ks_two_sample(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let sq = ne.sqrt();
    kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)
}

/// Least-squares slope of `log P̂[X > x]` against `log x` over the largest
/// `fraction` of the positive values.
///
/// Returns `None` when fewer than three usable points remain.
pub fn tail_slope(values: &[f64], fraction: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    let n = values.len() as f64;
    let k = ((fraction * n).floor() as usize).min(v.len());
    if k < 3 {
        return None;
    }
    // The i-th largest value (0-based) has empirical exceedance probability (i + 1)/n.
    let pts: Vec<(f64, f64)> = v[..k]
        .iter()
        .enumerate()
        .map(|(i, &x)| (x.ln(), ((i + 1) as f64 / n).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
