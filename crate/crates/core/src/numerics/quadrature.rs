//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals are kept in a pool and the one carrying the largest error
//! estimate is bisected until the total error meets the requested
//! tolerance. Semi-infinite ranges are mapped onto `[0, 1)`.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5] and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Number of equal pieces the range is cut into before adaptation starts.
    pub initial_pieces: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 4000,
            initial_pieces: 1,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_pieces(mut self, pieces: usize) -> Self {
        self.initial_pieces = pieces.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid("integration bounds must be finite"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let pieces = opts.initial_pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut pool: Vec<Segment> = (0..pieces)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + width };
            kronrod15(&f, lo, hi)
        })
        .collect();

    loop {
        let value: f64 = pool.iter().map(|s| s.value).sum();
        let error: f64 = pool.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                intervals: pool.len(),
            });
        }
        // Below the rounding level of the summed magnitudes no further progress is possible.
        let magnitude: f64 = pool.iter().map(|s| s.value.abs()).sum();
        let target = opts
            .abs_tol
            .max(opts.rel_tol * value.abs())
            .max(50.0 * f64::EPSILON * magnitude);
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                intervals: pool.len(),
            });
        }
        if pool.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                intervals: pool.len(),
            });
        }
        let (worst, _) = pool
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let seg = pool.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in floating point; accept what we have.
            return Ok(QuadResult {
                value,
                error,
                intervals: pool.len() + 1,
            });
        }
        pool.push(kronrod15(&f, seg.a, mid));
        pool.push(kronrod15(&f, mid, seg.b));
    }
}

/// Integrates `f` over `[a, ∞)` through the substitution `x = a + v / (1 − v)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    let g = |v: f64| {
        if v >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - v;
        let x = a + v / w;
        let y = f(x);
        if y == 0.0 {
            0.0
        } else {
            y / (w * w)
        }
    };
    integrate(g, 0.0, 1.0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::PI, QuadOptions::rel(1e-12)).unwrap();
        assert!(r.value.abs() < 1e-12);
        let r = integrate(|x: f64| (x).cos(), 0.0, 1.0, QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - 1f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫₀¹ x^{-1/2} dx = 2
        let r = integrate(|x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, QuadOptions::rel(1e-9)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_to_infinity(|x: f64| 1.0 / (x * x), 1.0, QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_on_divergence() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, QuadOptions { max_intervals: 50, ..QuadOptions::default() });
        assert!(r.is_err());
    }
}
