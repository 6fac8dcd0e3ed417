//! Deterministic normalising sequences.
//!
//! Every sequence is pinned to the exact root of its defining equation
//! (e.g. `t·P[X > a_t] = 1`) rather than to an asymptotic equivalent.

use serde::{Deserialize, Serialize};

use crate::distributions::{Family, ParetoTypeModel};
use crate::error::{invalid, Error, Result};
use crate::limits::CaseId;
use crate::numerics::bisect;

const REL_TOL: f64 = 1e-15;

/// Root `x` of `t·P[X > x] = 1`.
pub fn solve_a(model: &ParetoTypeModel, t: f64) -> Result<f64> {
    check_t(t)?;
    if let Family::ExactPareto = model.family() {
        return Ok(model.x_min() * t.powf(1.0 / model.alpha()));
    }
    model.quantile(1.0 / t)
}

/// Largest root `x` of `t·ℓ̃(x) = x^κ`, for `κ ∈ {1, 2}` with `α = κ` and `μ_κ = ∞`.
pub fn solve_a_prime(model: &ParetoTypeModel, t: f64, kappa: u32) -> Result<f64> {
    check_t(t)?;
    if !(kappa == 1 || kappa == 2) {
        return Err(invalid(format!("κ must be 1 or 2, got {kappa}")));
    }
    let k = f64::from(kappa);
    if model.moment(k)?.is_finite() {
        return Err(Error::RegimeViolation(format!(
            "a′ with κ={kappa} needs μ_{kappa}=∞; this claim law has a finite moment of order {kappa}"
        )));
    }
    if model.alpha() != k {
        return Err(Error::RegimeViolation(format!(
            "a′ with κ={kappa} needs tail index α={kappa} (got α={})",
            model.alpha()
        )));
    }
    let log_xmin = model.x_min().ln();
    let log_t = t.ln();
    // g(L) = log(t ℓ̃(x) / x^κ) at x = x_min e^L; the sought root is its last +→− crossing.
    let g = |l: f64| log_t + model.ell_tilde(model.x_min() * l.exp()).ln() - k * (log_xmin + l);
    let l_max = (700.0 - log_xmin).max(1.0);
    let mut grid = Vec::new();
    let mut l = 1e-10;
    while l < l_max {
        grid.push(l);
        l *= 1.05;
    }
    grid.push(l_max);
    let values: Vec<f64> = grid.iter().map(|&l| g(l)).collect();
    let crossing = (0..grid.len() - 1)
        .rev()
        .find(|&i| values[i] > 0.0 && values[i + 1] <= 0.0)
        .ok_or_else(|| Error::RootFinding(format!("t·ℓ̃(x) = x^{kappa} has no root for t = {t}")))?;
    let root = bisect(g, grid[crossing], grid[crossing + 1], REL_TOL, 1.0)?;
    Ok(model.x_min() * root.exp())
}

/// Sequences for the finite-variance, infinite-fourth-moment regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case5Sequences {
    pub c_t: f64,
    pub ell_star_t: f64,
    pub b_t: f64,
}

/// `c_t` solves `t·c^{−α/2} ℓ(√c) = 1`, i.e. `√c_t = a_t`; then `ℓ* = c_t t^{−2/α}` and `b_t = t/c_t`.
pub fn solve_case5(model: &ParetoTypeModel, t: f64) -> Result<Case5Sequences> {
    check_t(t)?;
    let alpha = model.alpha();
    let in_regime = (alpha > 2.0 && alpha < 4.0) || (alpha == 2.0 && model.moment(2.0)?.is_finite());
    if !in_regime {
        return Err(Error::RegimeViolation(format!(
            "case 5 sequences need α∈(2,4), or α=2 with μ₂<∞ (got α={alpha})"
        )));
    }
    let a = solve_a(model, t)?;
    let c_t = a * a;
    Ok(Case5Sequences {
        c_t,
        ell_star_t: c_t * t.powf(-2.0 / alpha),
        b_t: t / c_t,
    })
}

/// The normalising constants one case needs at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizerTable {
    pub case: CaseId,
    pub t: f64,
    pub a_t: f64,
    pub a_prime_t: Option<f64>,
    pub c_t: Option<f64>,
    pub ell_star_t: Option<f64>,
    pub b_t: Option<f64>,
}

impl NormalizerTable {
    pub fn for_case(model: &ParetoTypeModel, case: CaseId, t: f64) -> Result<Self> {
        let mut table = Self {
            case,
            t,
            a_t: solve_a(model, t)?,
            a_prime_t: None,
            c_t: None,
            ell_star_t: None,
            b_t: None,
        };
        match case {
            CaseId::C2 => table.a_prime_t = Some(solve_a_prime(model, t, 1)?),
            CaseId::C4a | CaseId::C4b => table.a_prime_t = Some(solve_a_prime(model, t, 2)?),
            CaseId::C5 => {
                let s = solve_case5(model, t)?;
                table.c_t = Some(s.c_t);
                table.ell_star_t = Some(s.ell_star_t);
                table.b_t = Some(s.b_t);
            }
            _ => {}
        }
        Ok(table)
    }

    pub fn a_prime(&self) -> Result<f64> {
        self.a_prime_t
            .ok_or_else(|| invalid(format!("case {} table has no a′_t", self.case)))
    }

    pub fn b(&self) -> Result<f64> {
        self.b_t.ok_or_else(|| invalid(format!("case {} table has no b_t", self.case)))
    }

    /// `(name, |lhs/rhs − 1|)` for every defining equation present in the table.
    pub fn residuals(&self, model: &ParetoTypeModel) -> Vec<(&'static str, f64)> {
        let t = self.t;
        let mut out = vec![("a_t", (t * model.survival(self.a_t) - 1.0).abs())];
        if let Some(ap) = self.a_prime_t {
            let kappa = model.alpha();
            out.push(("a_prime_t", (t * model.ell_tilde(ap) / ap.powf(kappa) - 1.0).abs()));
        }
        if let Some(c) = self.c_t {
            let alpha = model.alpha();
            out.push(("c_t", (t * c.powf(-alpha / 2.0) * model.ell(c.sqrt()) - 1.0).abs()));
        }
        if let (Some(c), Some(b)) = (self.c_t, self.b_t) {
            out.push(("b_t", (b * c / t - 1.0).abs()));
        }
        out
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("normalisers need finite t > 1, got {t}")))
    }
}
