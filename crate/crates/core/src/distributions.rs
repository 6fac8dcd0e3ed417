//! Pareto-type claim-size laws.
//!
//! Each family has a survival function of the form `x^{-α} ℓ(x)` above its
//! support endpoint `x_min`, with `ℓ` slowly varying:
//!
//! * `ExactPareto`: `(x/x_min)^{-α}`, so `ℓ ≡ x_min^α`.
//! * `LogPerturbed`: `(x/x_min)^{-α} (1 + log(x/x_min))^ρ`.
//! * `Hall`: `min(1, C x^{-α} (1 + D x^{-β}))`, with `x_min` the point where
//!   the second argument reaches one.
//!
//! Together they cover every moment regime the limit theorems distinguish,
//! including `α = 1` with finite or infinite mean and `α = 2` with finite or
//! infinite variance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{bisect, bracket_upward, integrate, integrate_to_infinity, QuadOptions};
use crate::rng::open_unit;

/// A moment `E X^β` that is either a finite number or divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

impl std::fmt::Display for Moment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Infinite => write!(f, "+inf"),
        }
    }
}

/// The first four moments of a claim law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mu1: Moment,
    pub mu2: Moment,
    pub mu3: Moment,
    pub mu4: Moment,
}

impl MomentSet {
    /// All four moments as numbers, or `None` if any diverges.
    pub fn all_finite(&self) -> Option<[f64; 4]> {
        Some([
            self.mu1.finite()?,
            self.mu2.finite()?,
            self.mu3.finite()?,
            self.mu4.finite()?,
        ])
    }

    pub fn from_values(mu: [f64; 4]) -> Self {
        Self {
            mu1: Moment::Finite(mu[0]),
            mu2: Moment::Finite(mu[1]),
            mu3: Moment::Finite(mu[2]),
            mu4: Moment::Finite(mu[3]),
        }
    }
}

/// Anything the ensemble simulator can draw claims from.
pub trait ClaimLaw: Send + Sync {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn moment_set(&self) -> Result<MomentSet>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    ExactPareto,
    LogPerturbed,
    Hall,
}

/// Serialized form of a claim-size law, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: FamilyKind,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(rename = "hall_C", default, skip_serializing_if = "Option::is_none")]
    pub hall_c: Option<f64>,
    #[serde(rename = "hall_D", default, skip_serializing_if = "Option::is_none")]
    pub hall_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hall_beta: Option<f64>,
}

impl DistributionSpec {
    pub fn exact_pareto(alpha: f64) -> Self {
        Self {
            family: FamilyKind::ExactPareto,
            alpha,
            x_min: Some(1.0),
            rho: None,
            hall_c: None,
            hall_d: None,
            hall_beta: None,
        }
    }

    pub fn build(&self) -> Result<ParetoTypeModel> {
        ParetoTypeModel::from_spec(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    ExactPareto,
    LogPerturbed { rho: f64 },
    Hall { c: f64, d: f64, beta: f64 },
}

/// A claim-size law with survival function `x^{-α} ℓ(x)` for `x ≥ x_min`.
///
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoTypeModel {
    alpha: f64,
    x_min: f64,
    family: Family,
}

const ROOT_REL_TOL: f64 = 1e-15;

impl ParetoTypeModel {
    pub fn exact_pareto(alpha: f64, x_min: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("x_min", x_min)?;
        Ok(Self {
            alpha,
            x_min,
            family: Family::ExactPareto,
        })
    }

    /// `ρ > α` is rejected: the survival function would increase just above `x_min`.
    pub fn log_perturbed(alpha: f64, rho: f64, x_min: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("x_min", x_min)?;
        if !rho.is_finite() {
            return Err(invalid("rho must be finite"));
        }
        if rho > alpha {
            return Err(invalid(format!(
                "log-perturbed tail needs rho <= alpha for monotonicity (rho = {rho}, alpha = {alpha})"
            )));
        }
        Ok(Self {
            alpha,
            x_min,
            family: Family::LogPerturbed { rho },
        })
    }

    /// Hall-class tail `C x^{-α}(1 + D x^{-β})`; `x_min` is solved from `C x^{-α}(1 + D x^{-β}) = 1`.
    pub fn hall(alpha: f64, c: f64, d: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("hall_C", c)?;
        check_positive("hall_beta", beta)?;
        if !d.is_finite() {
            return Err(invalid("hall_D must be finite"));
        }
        let x_min = hall_support_start(alpha, c, d, beta)?;
        Ok(Self {
            alpha,
            x_min,
            family: Family::Hall { c, d, beta },
        })
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        match spec.family {
            FamilyKind::ExactPareto => Self::exact_pareto(spec.alpha, spec.x_min.unwrap_or(1.0)),
            FamilyKind::LogPerturbed => {
                let rho = spec
                    .rho
                    .ok_or_else(|| invalid("log_perturbed family needs `rho`"))?;
                Self::log_perturbed(spec.alpha, rho, spec.x_min.unwrap_or(1.0))
            }
            FamilyKind::Hall => {
                let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("hall family needs `{name}`")));
                let model = Self::hall(
                    spec.alpha,
                    need(spec.hall_c, "hall_C")?,
                    need(spec.hall_d, "hall_D")?,
                    need(spec.hall_beta, "hall_beta")?,
                )?;
                if let Some(x) = spec.x_min {
                    if ((x - model.x_min) / model.x_min).abs() > 1e-9 {
                        return Err(invalid(format!(
                            "hall family derives x_min = {} from its constants; config gave {x}",
                            model.x_min
                        )));
                    }
                }
                Ok(model)
            }
        }
    }

    pub fn to_spec(&self) -> DistributionSpec {
        let mut spec = DistributionSpec {
            family: FamilyKind::ExactPareto,
            alpha: self.alpha,
            x_min: Some(self.x_min),
            rho: None,
            hall_c: None,
            hall_d: None,
            hall_beta: None,
        };
        match self.family {
            Family::ExactPareto => {}
            Family::LogPerturbed { rho } => {
                spec.family = FamilyKind::LogPerturbed;
                spec.rho = Some(rho);
            }
            Family::Hall { c, d, beta } => {
                spec.family = FamilyKind::Hall;
                spec.x_min = None;
                spec.hall_c = Some(c);
                spec.hall_d = Some(d);
                spec.hall_beta = Some(beta);
            }
        }
        spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `P[X > x]`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.x_min {
            return 1.0;
        }
        match self.family {
            Family::ExactPareto => (x / self.x_min).powf(-self.alpha),
            Family::LogPerturbed { rho } => {
                let l = (x / self.x_min).ln();
                (-self.alpha * l).exp() * (1.0 + l).powf(rho)
            }
            Family::Hall { c, d, beta } => (c * x.powf(-self.alpha) * (1.0 + d * x.powf(-beta))).min(1.0),
        }
    }

    /// Inverse of [`survival`](Self::survival): the `x` with `P[X > x] = u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(invalid(format!("quantile needs u in (0, 1], got {u}")));
        }
        if u == 1.0 {
            return Ok(self.x_min);
        }
        let log_u = u.ln();
        match self.family {
            Family::ExactPareto => Ok(self.x_min * (-log_u / self.alpha).exp()),
            Family::LogPerturbed { rho } => {
                // Solve -αL + ρ log(1+L) = log u for L = log(x/x_min) ≥ 0.
                let alpha = self.alpha;
                let h = |l: f64| -alpha * l + rho * (1.0 + l).ln() - log_u;
                let l = solve_decreasing_from_zero(h)?;
                Ok(self.x_min * l.exp())
            }
            Family::Hall { c, d, beta } => {
                let y0 = self.x_min.ln();
                let alpha = self.alpha;
                let h = |dy: f64| {
                    let y = y0 + dy;
                    c.ln() - alpha * y + (d * (-beta * y).exp()).ln_1p() - log_u
                };
                let dy = solve_decreasing_from_zero(h)?;
                Ok((y0 + dy).exp())
            }
        }
    }

    /// Draws `quantile(U)` with `U` uniform on `(0, 1]`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        match self.family {
            Family::ExactPareto => self.x_min * u.powf(-1.0 / self.alpha),
            _ => self
                .quantile(u)
                .expect("quantile is total on (0, 1] for a validated model"),
        }
    }

    /// `μ_β = E X^β = β ∫₀^∞ x^{β−1} P[X > x] dx`.
    pub fn moment(&self, beta: f64) -> Result<Moment> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("moment order must be positive, got {beta}")));
        }
        let alpha = self.alpha;
        let x_min = self.x_min;
        match self.family {
            Family::ExactPareto => {
                if beta < alpha {
                    Ok(Moment::Finite(x_min.powf(beta) * alpha / (alpha - beta)))
                } else {
                    Ok(Moment::Infinite)
                }
            }
            Family::Hall { c, d, beta: hb } => {
                if beta < alpha {
                    let head = x_min.powf(beta);
                    let tail = beta
                        * c
                        * (x_min.powf(beta - alpha) / (alpha - beta)
                            + d * x_min.powf(beta - alpha - hb) / (alpha + hb - beta));
                    Ok(Moment::Finite(head + tail))
                } else {
                    Ok(Moment::Infinite)
                }
            }
            Family::LogPerturbed { rho } => {
                // With x = x_min e^u: μ_β = x_min^β (1 + β ∫₀^∞ e^{(β−α)u}(1+u)^ρ du).
                let decay = alpha - beta;
                let converges = decay > 0.0 || (decay == 0.0 && rho < -1.0);
                if !converges {
                    return Ok(Moment::Infinite);
                }
                let integrand = |u: f64| (-decay * u).exp() * (1.0 + u).powf(rho);
                let q = integrate_to_infinity(
                    integrand,
                    0.0,
                    QuadOptions {
                        rel_tol: 1e-11,
                        max_intervals: 20_000,
                        ..QuadOptions::default()
                    }
                    .with_pieces(8),
                )?;
                Ok(Moment::Finite(x_min.powf(beta) * (1.0 + beta * q.value)))
            }
        }
    }

    pub fn moment_set(&self) -> Result<MomentSet> {
        Ok(MomentSet {
            mu1: self.moment(1.0)?,
            mu2: self.moment(2.0)?,
            mu3: self.moment(3.0)?,
            mu4: self.moment(4.0)?,
        })
    }

    /// The slowly varying part `ℓ(x) = x^α P[X > x]` for `x ≥ x_min`, zero below.
    pub fn ell(&self, x: f64) -> f64 {
        if x < self.x_min {
            return 0.0;
        }
        match self.family {
            Family::ExactPareto => self.x_min.powf(self.alpha),
            Family::LogPerturbed { rho } => self.x_min.powf(self.alpha) * (1.0 + (x / self.x_min).ln()).powf(rho),
            Family::Hall { c, d, beta } => c * (1.0 + d * x.powf(-beta)),
        }
    }

    /// `ℓ̃(x) = ∫ ℓ(u)/u du` over `[x_min, x]` (ℓ vanishes below `x_min`).
    pub fn ell_tilde(&self, x: f64) -> f64 {
        if x <= self.x_min {
            return 0.0;
        }
        let l = (x / self.x_min).ln();
        match self.family {
            Family::ExactPareto => self.x_min.powf(self.alpha) * l,
            Family::LogPerturbed { rho } => {
                let scale = self.x_min.powf(self.alpha);
                if rho == -1.0 {
                    scale * l.ln_1p()
                } else {
                    // ((1+L)^{ρ+1} − 1)/(ρ+1), written to stay accurate for small L.
                    let p = rho + 1.0;
                    scale * (p * l.ln_1p()).exp_m1() / p
                }
            }
            Family::Hall { c, d, beta } => c * (l + d / beta * (self.x_min.powf(-beta) - x.powf(-beta))),
        }
    }

    /// Quadrature route to `ℓ̃`, independent of the closed forms above.
    pub fn ell_tilde_by_quadrature(&self, x: f64) -> Result<f64> {
        if x <= self.x_min {
            return Ok(0.0);
        }
        // Integrate in s = log u to keep the integrand smooth.
        let lo = self.x_min.ln();
        let hi = x.ln();
        let q = integrate(|s| self.ell(s.exp()), lo, hi, QuadOptions::rel(1e-12).with_pieces(4))?;
        Ok(q.value)
    }
}

impl ClaimLaw for ParetoTypeModel {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        ParetoTypeModel::sample(self, rng)
    }

    fn moment_set(&self) -> Result<MomentSet> {
        ParetoTypeModel::moment_set(self)
    }
}

/// Degenerate law `X ≡ c`. Useful for checking that delta-method variances vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass(pub f64);

impl ClaimLaw for PointMass {
    fn sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> f64 {
        self.0
    }

    fn moment_set(&self) -> Result<MomentSet> {
        let c = self.0;
        Ok(MomentSet::from_values([c, c * c, c * c * c, c * c * c * c]))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("tail index must be positive and finite, got {alpha}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Root of a decreasing `h` on `[0, ∞)` with `h(0) ≥ 0`.
fn solve_decreasing_from_zero<F: Fn(f64) -> f64>(h: F) -> Result<f64> {
    if h(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = if h(1.0) <= 0.0 {
        (0.0, 1.0)
    } else {
        bracket_upward(&h, 1.0, 2.0, 1e15)?
    };
    bisect(&h, lo, hi, ROOT_REL_TOL, 1.0)
}

fn hall_support_start(alpha: f64, c: f64, d: f64, beta: f64) -> Result<f64> {
    // k(y) = log(C e^{-αy}(1 + D e^{-βy})); x_min = e^y at the root to the right of the peak.
    let k = |y: f64| c.ln() - alpha * y + (d * (-beta * y).exp()).ln_1p();
    let start = if d >= 0.0 {
        c.ln() / alpha
    } else {
        let peak = ((alpha + beta) * (-d) / alpha).ln() / beta;
        let top = k(peak);
        if top.is_nan() || top < 0.0 {
            return Err(invalid(format!(
                "hall constants C={c}, D={d}, beta={beta} never reach survival 1; no valid support"
            )));
        }
        peak
    };
    let dy = solve_decreasing_from_zero(|dy| k(start + dy))
        .map_err(|e| Error::RootFinding(format!("hall support start: {e}")))?;
    Ok((start + dy).exp())
}
