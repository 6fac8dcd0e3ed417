/// Neumaier's variant of Kahan compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.comp *= factor;
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of squares that stays finite when individual squares
/// would overflow.
///
/// The total is `scale² · rel`. While every term is below
/// `scale · RESCALE_AT` the terms are accumulated as `(x/scale)²`; a larger
/// term moves the scale up to that term. With the initial scale of one the
/// common case is a plain compensated sum of `x²`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSumSq {
    scale: f64,
    rel: NeumaierSum,
}

const RESCALE_AT: f64 = 1e100;

impl Default for ScaledSumSq {
    fn default() -> Self {
        Self {
            scale: 1.0,
            rel: NeumaierSum::new(),
        }
    }
}

impl ScaledSumSq {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let x = x.abs();
        if self.scale == 1.0 && x <= RESCALE_AT {
            self.rel.add(x * x);
            return;
        }
        if x > self.scale * RESCALE_AT {
            let ratio = self.scale / x;
            self.rel.scale(ratio * ratio);
            self.scale = x;
        }
        let y = x / self.scale;
        self.rel.add(y * y);
    }

    /// Scale factor `s` such that the sum equals `s² · relative()`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn relative(&self) -> f64 {
        self.rel.value()
    }

    /// The plain sum of squares; may overflow to infinity for extreme inputs.
    pub fn value(&self) -> f64 {
        self.scale * self.scale * self.rel.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = NeumaierSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn sum_of_squares_matches_plain_sum() {
        let xs = [0.5, 3.0, 7.25, 1e3];
        let mut s = ScaledSumSq::new();
        for &x in &xs {
            s.add(x);
        }
        let plain: f64 = xs.iter().map(|x| x * x).sum();
        assert_eq!(s.scale(), 1.0);
        assert!((s.value() - plain).abs() <= 1e-15 * plain);
    }

    #[test]
    fn huge_terms_stay_finite() {
        let mut s = ScaledSumSq::new();
        s.add(2.0);
        s.add(1e200);
        s.add(3e200);
        assert!(s.relative().is_finite());
        assert_eq!(s.scale(), 1e200);
        let ratio = s.relative() * (s.scale() / 4e200).powi(2);
        assert!((ratio - 10.0 / 16.0).abs() < 1e-14);
    }
}
