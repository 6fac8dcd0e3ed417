use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` for a function whose sign differs at the two ends.
///
/// Stops when the bracket is narrower than `rel_tol * max(|lo|, |hi|, floor)`
/// or when floating point can no longer split it. `floor` keeps the
/// stopping rule meaningful near zero.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64, floor: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:e}, {hi:e}] (f = {f_lo:e}, {f_hi:e})"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * lo.abs().max(hi.abs()).max(floor) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Walks `x ← x·factor` from `start` until the sign of `f` differs from its sign at
/// `start`. Returns the last point before and the first point after the change.
pub fn bracket_upward<F: Fn(f64) -> f64>(f: F, start: f64, factor: f64, limit: f64) -> Result<(f64, f64)> {
    let s0 = f(start).signum();
    let mut lo = start;
    let mut hi = start * factor;
    while hi <= limit {
        let v = f(hi);
        if v.is_nan() {
            break;
        }
        if v.signum() != s0 || v == 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= factor;
    }
    Err(Error::RootFinding(format!(
        "no sign change found between {start:e} and {limit:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 1.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x: f64| (-x).exp() - 0.25, 0.0, 10.0, 1e-14, 1.0).unwrap();
        assert!((r - 4f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn rejects_missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 1.0).is_err());
    }

    #[test]
    fn brackets_by_doubling() {
        let (lo, hi) = bracket_upward(|x| 1000.0 - x, 1.0, 2.0, 1e300).unwrap();
        assert_eq!((lo, hi), (512.0, 1024.0));
        assert!(bracket_upward(|x| 1.0 + x, 1.0, 2.0, 1e10).is_err());
    }
}
