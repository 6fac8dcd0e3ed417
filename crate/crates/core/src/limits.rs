//! Limiting laws of the scaled statistics.
//!
//! Laplace transforms of the limits are evaluated exactly (up to quadrature
//! error for `δ_α`), the delta-method variances are closed-form, and limits
//! that factor into independent tractable pieces get a direct sampler.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::counting::{Averaging, CountingProcessModel, MixingLaw};
use crate::distributions::{Moment, MomentSet, ParetoTypeModel};
use crate::error::{invalid, Error, Result};
use crate::numerics::{gamma, integrate, QuadOptions};
use crate::rng::open_unit;

/// Regime of the limit theorems; `a`/`b` select the `N(t)` or `t` normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "1")]
    C1,
    #[serde(rename = "2")]
    C2,
    #[serde(rename = "3a")]
    C3a,
    #[serde(rename = "3b")]
    C3b,
    #[serde(rename = "4a")]
    C4a,
    #[serde(rename = "4b")]
    C4b,
    #[serde(rename = "5")]
    C5,
    #[serde(rename = "6")]
    C6,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::C1,
        CaseId::C2,
        CaseId::C3a,
        CaseId::C3b,
        CaseId::C4a,
        CaseId::C4b,
        CaseId::C5,
        CaseId::C6,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseId::C1 => "1",
            CaseId::C2 => "2",
            CaseId::C3a => "3a",
            CaseId::C3b => "3b",
            CaseId::C4a => "4a",
            CaseId::C4b => "4b",
            CaseId::C5 => "5",
            CaseId::C6 => "6",
        }
    }

    /// Whether a joint limiting Laplace transform is available.
    pub fn has_joint_laplace(&self) -> bool {
        matches!(self, CaseId::C1 | CaseId::C2 | CaseId::C3b | CaseId::C4b)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown case `{s}`; expected one of 1, 2, 3a, 3b, 4a, 4b, 5, 6")))
    }
}

/// Which statistic a limit refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// The ratio `T = ΣX²/(ΣX)²`.
    Ratio,
    /// Sample coefficient of variation `S/X̄`.
    Cov,
    /// Sample dispersion `S²/X̄`.
    Dispersion,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 3] = [StatisticKind::Ratio, StatisticKind::Cov, StatisticKind::Dispersion];

    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticKind::Ratio => "ratio",
            StatisticKind::Cov => "cov",
            StatisticKind::Dispersion => "dispersion",
        }
    }
}

/// Form of the Case 3b joint transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case3bLt {
    /// Exponent `r^{α/2}Γ(1−α/2) + μ₁ s`, consistent with the marginal `Z ≡ μ₁Λ`.
    #[default]
    Corrected,
    /// The s-free exponent `r^{α/2}Γ(1−α/2)`, kept for comparison.
    #[serde(rename = "paper")]
    SFree,
}

/// Checks that a claim law and counting process satisfy the hypotheses of `case`.
pub fn validate_regime(case: CaseId, alpha: f64, moments: &MomentSet, averaging: Averaging) -> Result<()> {
    let fail = |msg: String| Err(Error::RegimeViolation(msg));
    match case {
        CaseId::C1 if !(alpha > 0.0 && alpha < 1.0) => fail(format!("case 1 requires α∈(0,1) (got α={alpha})")),
        CaseId::C2 if !(alpha == 1.0 && !moments.mu1.is_finite()) => {
            fail(format!("case 2 requires α=1 and μ₁=∞ (got α={alpha}, μ₁={})", moments.mu1))
        }
        CaseId::C3a | CaseId::C3b if !((alpha > 1.0 && alpha < 2.0) || (alpha == 1.0 && moments.mu1.is_finite())) => fail(
            format!("case 3 requires α∈(1,2), or α=1 with μ₁<∞ (got α={alpha}, μ₁={})", moments.mu1),
        ),
        CaseId::C4a | CaseId::C4b if !(alpha == 2.0 && !moments.mu2.is_finite()) => {
            fail(format!("case 4 requires α=2 and μ₂=∞ (got α={alpha}, μ₂={})", moments.mu2))
        }
        CaseId::C5 => {
            if !((alpha > 2.0 && alpha < 4.0) || (alpha == 2.0 && moments.mu2.is_finite())) {
                return fail(format!(
                    "case 5 requires α∈(2,4), or α=2 with μ₂<∞ (got α={alpha}, μ₂={})",
                    moments.mu2
                ));
            }
            if averaging != Averaging::Probability {
                return fail("case 5 requires p-averaging (set counting.averaging = \"p\")".to_string());
            }
            Ok(())
        }
        CaseId::C6 if !moments.mu4.is_finite() => fail("case 6 requires μ₄<∞".to_string()),
        _ => Ok(()),
    }
}

/// Everything needed to evaluate or sample the limit of one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawSpec {
    pub case: CaseId,
    pub alpha: f64,
    pub mixing: MixingLaw,
    pub moments: MomentSet,
    /// `Var X`, when finite.
    pub sigma_sq: Option<f64>,
    pub sigma_star_sq: Option<f64>,
    pub sigma_star_star_sq: Option<f64>,
    pub case3b_lt: Case3bLt,
}

impl LimitLawSpec {
    /// Builds the spec after validating the regime.
    pub fn new(case: CaseId, claims: &ParetoTypeModel, counting: &CountingProcessModel) -> Result<Self> {
        let moments = claims.moment_set()?;
        validate_regime(case, claims.alpha(), &moments, counting.averaging())?;
        Ok(Self::from_parts(case, claims.alpha(), counting.mixing(), moments))
    }

    /// Builds the spec without regime checks.
    pub fn from_parts(case: CaseId, alpha: f64, mixing: MixingLaw, moments: MomentSet) -> Self {
        let sigma_sq = match (moments.mu1, moments.mu2) {
            (Moment::Finite(m1), Moment::Finite(m2)) => Some(m2 - m1 * m1),
            _ => None,
        };
        Self {
            case,
            alpha,
            mixing,
            moments,
            sigma_sq,
            sigma_star_sq: sigma_star_sq(&moments).ok(),
            sigma_star_star_sq: sigma_star_star_sq(&moments).ok(),
            case3b_lt: Case3bLt::default(),
        }
    }

    pub fn with_case3b_lt(mut self, form: Case3bLt) -> Self {
        self.case3b_lt = form;
        self
    }

    fn mu1(&self) -> Result<f64> {
        self.moments
            .mu1
            .finite()
            .ok_or_else(|| Error::RegimeViolation(format!("case {} needs a finite mean", self.case)))
    }
}

const DELTA_TRUNCATION: f64 = 60.0;

/// `δ_α(r,s) = 2 r^{α/2} ∫₀^∞ e^{−u²−2uc}(u+c) u^{−α} du` with `c = s/(2√r)`.
pub fn delta_alpha(r: f64, s: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("δ_α needs r > 0, got {r}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid(format!("δ_α needs s ≥ 0, got {s}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("δ_α needs α in (0,1), got {alpha}")));
    }
    let c = s / (2.0 * r.sqrt());
    // u = v^{1/(1−α)} absorbs the u^{−α} singularity: u^{−α} du = dv/(1−α).
    let power = 1.0 / (1.0 - alpha);
    // Truncate where u² + 2cu = K; the neglected tail is below e^{−K} u_max^{−α}/2.
    let u_max = DELTA_TRUNCATION / (c + (c * c + DELTA_TRUNCATION).sqrt());
    let v_max = u_max.powf(1.0 - alpha);
    let f = |v: f64| {
        let u = v.powf(power);
        (-u * (u + 2.0 * c)).exp() * (u + c)
    };
    let q = integrate(f, 0.0, v_max, QuadOptions::rel(1e-13).with_pieces(8))?;
    Ok(2.0 * r.powf(alpha / 2.0) * q.value * power)
}

/// `lim_{r→0} δ_α(r,s) = s^α Γ(1−α)`.
pub fn delta_alpha_at_zero_r(s: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.powf(alpha) * gamma(1.0 - alpha)
    }
}

/// Joint limiting Laplace transform of the case's scaled pair at `(r, s)`.
pub fn lt_limit(spec: &LimitLawSpec, r: f64, s: f64) -> Result<f64> {
    if !(r >= 0.0 && s >= 0.0 && r.is_finite() && s.is_finite()) {
        return Err(invalid(format!("Laplace arguments must be finite and nonnegative, got ({r}, {s})")));
    }
    let alpha = spec.alpha;
    let exponent = match spec.case {
        CaseId::C1 => {
            if r == 0.0 {
                delta_alpha_at_zero_r(s, alpha)
            } else {
                delta_alpha(r, s, alpha)?
            }
        }
        CaseId::C2 => (r * std::f64::consts::PI).sqrt(),
        CaseId::C3b => {
            let u_part = r.powf(alpha / 2.0) * gamma(1.0 - alpha / 2.0);
            match spec.case3b_lt {
                Case3bLt::Corrected => u_part + spec.mu1()? * s,
                Case3bLt::SFree => u_part,
            }
        }
        CaseId::C4b => 2.0 * r + spec.mu1()? * s,
        other => {
            return Err(Error::Unsupported(format!(
                "no joint limiting Laplace transform is tabulated for case {other}"
            )))
        }
    };
    Ok(spec.mixing.laplace(exponent))
}

/// `σ_*² = μ₄/μ₁⁴ − (μ₂/μ₁²)² + 4(μ₂/μ₁²)³ − 4μ₂μ₃/μ₁⁵`, the asymptotic variance of `√n(nT_n − μ₂/μ₁²)`.
pub fn sigma_star_sq(m: &MomentSet) -> Result<f64> {
    let [m1, m2, m3, m4] = finite_moments(m)?;
    let q = m2 / (m1 * m1);
    Ok(m4 / m1.powi(4) - q * q + 4.0 * q.powi(3) - 4.0 * m2 * m3 / m1.powi(5))
}

/// `σ_**² = μ₂ − μ₁² + μ₂³/μ₁⁴ − 2μ₃/μ₁ − 2μ₂μ₃/μ₁³ + 2(μ₂/μ₁)² + μ₄/μ₁²`, the asymptotic variance of the sample dispersion.
pub fn sigma_star_star_sq(m: &MomentSet) -> Result<f64> {
    let [m1, m2, m3, m4] = finite_moments(m)?;
    Ok(m2 - m1 * m1 + m2.powi(3) / m1.powi(4) - 2.0 * m3 / m1 - 2.0 * m2 * m3 / m1.powi(3)
        + 2.0 * (m2 / m1).powi(2)
        + m4 / (m1 * m1))
}

fn finite_moments(m: &MomentSet) -> Result<[f64; 4]> {
    let mu = m
        .all_finite()
        .ok_or_else(|| Error::RegimeViolation("delta-method variances need μ₁,…,μ₄ < ∞".to_string()))?;
    if mu[0] <= 0.0 {
        return Err(invalid("delta-method variances need μ₁ > 0"));
    }
    Ok(mu)
}

/// Chambers–Mallows–Stuck sampler for a totally right-skewed stable law.
///
/// For `p < 1` draws satisfy `E e^{−rW} = e^{−r^p}`. For `p ∈ (1,2)` draws
/// have characteristic function `exp(−|θ|^p (1 − i sgn θ tan(πp/2)))` and mean zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSampler {
    p: f64,
    shift: f64,
    scale: f64,
}

impl StableSampler {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 2.0) || p == 1.0 {
            return Err(invalid(format!("stable exponent must lie in (0,1)∪(1,2), got {p}")));
        }
        let tan = (std::f64::consts::FRAC_PI_2 * p).tan();
        let shift = tan.atan() / p;
        let mut scale = (1.0 + tan * tan).powf(1.0 / (2.0 * p));
        if p < 1.0 {
            scale *= (std::f64::consts::FRAC_PI_2 * p).cos().powf(1.0 / p);
        }
        Ok(Self { p, shift, scale })
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.p;
        let v = std::f64::consts::PI * (open_unit(rng) - 0.5);
        let w: f64 = Exp1.sample(rng);
        let pv = p * (v + self.shift);
        self.scale * pv.sin() / v.cos().powf(1.0 / p) * ((v - pv).cos() / w).powf((1.0 - p) / p)
    }
}

/// One draw from the skew-one stable law of exponent `p`; see [`StableSampler`].
pub fn sample_stable<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<f64> {
    Ok(StableSampler::new(p)?.sample(rng))
}

/// Direct sampler for limits built from independent `Λ`, one-sided stable and normal factors.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSampler {
    spec: LimitLawSpec,
    kind: StatisticKind,
    stable: Option<StableSampler>,
    normal_sd: f64,
}

impl ReferenceSampler {
    pub fn new(spec: &LimitLawSpec, kind: StatisticKind) -> Result<Self> {
        let unsupported = || {
            Err(Error::Unsupported(format!(
                "no reference sampler for case {} ({}); compare Laplace transforms instead",
                spec.case,
                kind.as_str()
            )))
        };
        let mut sampler = Self {
            spec: *spec,
            kind,
            stable: None,
            normal_sd: 0.0,
        };
        match spec.case {
            CaseId::C3a | CaseId::C3b => {
                spec.mu1()?;
                sampler.stable = Some(StableSampler::new(spec.alpha / 2.0)?);
            }
            CaseId::C4a | CaseId::C4b => {
                spec.mu1()?;
            }
            CaseId::C6 => {
                let var = match kind {
                    StatisticKind::Ratio => spec.sigma_star_sq,
                    StatisticKind::Cov => match (spec.sigma_star_sq, spec.sigma_sq, spec.moments.mu1.finite()) {
                        (Some(ss), Some(s2), Some(m1)) if s2 > 0.0 => Some(ss * m1 * m1 / (4.0 * s2)),
                        _ => None,
                    },
                    StatisticKind::Dispersion => spec.sigma_star_star_sq,
                };
                let var = var.ok_or_else(|| Error::RegimeViolation("case 6 needs finite μ₁,…,μ₄ and σ² > 0".into()))?;
                sampler.normal_sd = var.max(0.0).sqrt();
            }
            _ => return unsupported(),
        }
        Ok(sampler)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lambda = self.spec.mixing.sample(rng);
        let mu1 = self.spec.moments.mu1.finite().unwrap_or(f64::NAN);
        let alpha = self.spec.alpha;
        let kind = self.kind;
        // U_α given Λ: (ΛΓ(1−α/2))^{2/α} times a standard positive stable of exponent α/2.
        let u_alpha = |rng: &mut R| {
            let s = self.stable.expect("stable factor present").sample(rng);
            (lambda * gamma(1.0 - alpha / 2.0)).powf(2.0 / alpha) * s
        };
        match (self.spec.case, kind) {
            (CaseId::C3a, StatisticKind::Ratio) => u_alpha(rng) / (mu1 * mu1),
            (CaseId::C3a, StatisticKind::Cov) => u_alpha(rng).sqrt() / mu1,
            (CaseId::C3a, StatisticKind::Dispersion) => u_alpha(rng) / mu1,
            (CaseId::C3b, StatisticKind::Ratio) => u_alpha(rng) / (mu1 * mu1 * lambda * lambda),
            (CaseId::C3b, StatisticKind::Cov) => u_alpha(rng).sqrt() / (mu1 * lambda),
            (CaseId::C3b, StatisticKind::Dispersion) => u_alpha(rng) / (mu1 * lambda),
            (CaseId::C4a, StatisticKind::Ratio) => 2.0 * lambda / (mu1 * mu1),
            (CaseId::C4a, StatisticKind::Cov) => (2.0 * lambda).sqrt() / mu1,
            (CaseId::C4a, StatisticKind::Dispersion) => 2.0 * lambda / mu1,
            (CaseId::C4b, StatisticKind::Ratio) => 2.0 / (mu1 * mu1 * lambda),
            (CaseId::C4b, StatisticKind::Cov) => (2.0 / lambda).sqrt() / mu1,
            (CaseId::C4b, StatisticKind::Dispersion) => 2.0 / mu1,
            (CaseId::C6, _) => {
                let z: f64 = StandardNormal.sample(rng);
                self.normal_sd * z / lambda.sqrt()
            }
            _ => unreachable!("constructor rejects unsupported cases"),
        }
    }
}

/// Convenience wrapper: builds the sampler and draws once.
pub fn limit_reference_sampler<R: Rng + ?Sized>(spec: &LimitLawSpec, kind: StatisticKind, rng: &mut R) -> Result<f64> {
    Ok(ReferenceSampler::new(spec, kind)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_to_infinity;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn degenerate(l: f64) -> MixingLaw {
        MixingLaw::degenerate(l).unwrap()
    }

    fn pareto_moments(alpha: f64) -> MomentSet {
        ParetoTypeModel::exact_pareto(alpha, 1.0).unwrap().moment_set().unwrap()
    }

    /// δ_α straight from its definition on [0, ∞), singularity left in place.
    fn delta_by_definition(r: f64, s: f64, alpha: f64) -> f64 {
        let c = s / (2.0 * r.sqrt());
        let f = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                (-(u + c) * (u + c)).exp() * (u + c) * (u / r.sqrt()).powf(-alpha)
            }
        };
        let opts = QuadOptions {
            rel_tol: 1e-10,
            max_intervals: 50_000,
            ..QuadOptions::default()
        };
        let head = integrate(f, 0.0, 1.0, opts).unwrap().value;
        let tail = integrate_to_infinity(f, 1.0, opts).unwrap().value;
        2.0 * (c * c).exp() * (head + tail)
    }

    #[test]
    fn delta_at_zero_s_is_gamma_closed_form() {
        for alpha in [0.2, 0.5, 0.8] {
            for r in [0.25, 1.0, 4.0] {
                let d = delta_alpha(r, 0.0, alpha).unwrap();
                let exact = r.powf(alpha / 2.0) * gamma(1.0 - alpha / 2.0);
                assert!(((d - exact) / d).abs() <= 1e-7, "α={alpha} r={r}: {d} vs {exact}");
            }
        }
        let g075 = 1.225_416_702_465_177_6;
        assert!((delta_alpha(1.0, 0.0, 0.5).unwrap() - g075).abs() < 1e-10);
    }

    #[test]
    fn delta_matches_untransformed_quadrature() {
        for (r, s, alpha) in [(1.0, 1.0, 0.5), (0.3, 2.0, 0.2), (4.0, 0.5, 0.8), (0.05, 1.0, 0.7)] {
            let ours = delta_alpha(r, s, alpha).unwrap();
            let direct = delta_by_definition(r, s, alpha);
            assert!(((ours - direct) / direct).abs() < 1e-7, "({r},{s},{alpha}): {ours} vs {direct}");
        }
    }

    #[test]
    fn delta_small_r_limit() {
        let d = delta_alpha(1e-6, 1.0, 0.5).unwrap();
        let limit = std::f64::consts::PI.sqrt();
        assert!((d - limit).abs() < 1e-3, "{d} vs {limit}");
        assert!((delta_alpha_at_zero_r(1.0, 0.5) - limit).abs() < 1e-12);
    }

    #[test]
    fn delta_is_increasing_in_both_arguments() {
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0];
        for alpha in [0.3, 0.7] {
            for (i, &r) in grid.iter().enumerate() {
                for (j, &s) in grid.iter().enumerate() {
                    let d = delta_alpha(r, s, alpha).unwrap();
                    if i + 1 < grid.len() {
                        assert!(delta_alpha(grid[i + 1], s, alpha).unwrap() > d);
                    }
                    if j + 1 < grid.len() {
                        assert!(delta_alpha(r, grid[j + 1], alpha).unwrap() > d);
                    }
                }
            }
        }
    }

    #[test]
    fn delta_rejects_bad_input() {
        assert!(delta_alpha(0.0, 1.0, 0.5).is_err());
        assert!(delta_alpha(1.0, -1.0, 0.5).is_err());
        assert!(delta_alpha(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lt_examples() {
        let m07 = pareto_moments(0.5);
        let c1 = LimitLawSpec::from_parts(CaseId::C1, 0.5, degenerate(1.0), m07);
        let expected = (-gamma(0.75)).exp();
        assert!((lt_limit(&c1, 1.0, 0.0).unwrap() - expected).abs() < 1e-10);

        let c2 = LimitLawSpec::from_parts(CaseId::C2, 1.0, degenerate(1.0), pareto_moments(1.0));
        for s in [0.0, 0.5, 3.0] {
            let v = lt_limit(&c2, 1.0, s).unwrap();
            assert!((v - (-std::f64::consts::PI.sqrt()).exp()).abs() < 1e-15);
        }

        let mut m = pareto_moments(2.0);
        m.mu1 = Moment::Finite(2.0);
        let c4b = LimitLawSpec::from_parts(CaseId::C4b, 2.0, MixingLaw::gamma(2.0, 2.0).unwrap(), m);
        assert!((lt_limit(&c4b, 1.0, 1.0).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn case3b_forms() {
        let m = pareto_moments(1.5);
        let spec = LimitLawSpec::from_parts(CaseId::C3b, 1.5, degenerate(1.0), m);
        let corrected = lt_limit(&spec, 1.0, 1.0).unwrap();
        let s_free = lt_limit(&spec.with_case3b_lt(Case3bLt::SFree), 1.0, 1.0).unwrap();
        assert!((corrected - (-(gamma(0.25) + 3.0)).exp()).abs() < 1e-14);
        assert!((s_free - (-gamma(0.25)).exp()).abs() < 1e-14);
    }

    #[test]
    fn lt_normalised_and_monotone() {
        let specs = [
            LimitLawSpec::from_parts(CaseId::C1, 0.7, MixingLaw::gamma(3.0, 3.0).unwrap(), pareto_moments(0.7)),
            LimitLawSpec::from_parts(CaseId::C2, 1.0, degenerate(2.0), pareto_moments(1.0)),
            LimitLawSpec::from_parts(CaseId::C3b, 1.5, degenerate(1.0), pareto_moments(1.5)),
            LimitLawSpec::from_parts(CaseId::C4b, 2.0, MixingLaw::gamma(2.0, 1.0).unwrap(), pareto_moments(2.0)),
        ];
        let grid = [0.0, 0.25, 0.5, 1.0, 2.0];
        for spec in &specs {
            assert_eq!(lt_limit(spec, 0.0, 0.0).unwrap(), 1.0);
            for (i, &r) in grid.iter().enumerate() {
                for (j, &s) in grid.iter().enumerate() {
                    let v = lt_limit(spec, r, s).unwrap();
                    assert!(v > 0.0 && v <= 1.0);
                    if i + 1 < grid.len() {
                        assert!(lt_limit(spec, grid[i + 1], s).unwrap() <= v);
                    }
                    if j + 1 < grid.len() {
                        assert!(lt_limit(spec, r, grid[j + 1]).unwrap() <= v);
                    }
                }
            }
        }
        let c6 = LimitLawSpec::from_parts(CaseId::C6, 5.0, degenerate(1.0), pareto_moments(5.0));
        assert!(matches!(lt_limit(&c6, 1.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sigma_values_for_pareto_five() {
        let m = pareto_moments(5.0);
        // Exact rational evaluation: μ = 5/4, 5/3, 5/2, 5.
        let (m1, m2, m3, m4) = (1.25f64, 5.0 / 3.0, 2.5, 5.0);
        let q = m2 / (m1 * m1);
        let oracle = m4 / m1.powi(4) - q * q + 4.0 * q * q * q - 4.0 * m2 * m3 / m1.powi(5);
        let s = sigma_star_sq(&m).unwrap();
        assert!((s - oracle).abs() < 1e-14);
        assert!((s - 0.3034).abs() < 5e-5, "{s}");
        let covar = (m2 - m1 * m1).sqrt() / m1;
        assert!((covar - 0.2582).abs() < 5e-5);
        assert!(sigma_star_star_sq(&m).unwrap() > 0.0);
    }

    #[test]
    fn sigma_values_vanish_for_point_mass() {
        for c in [0.5, 1.0, 3.0] {
            let m = MomentSet::from_values([c, c * c, c.powi(3), c.powi(4)]);
            assert!(sigma_star_sq(&m).unwrap().abs() < 1e-12);
            assert!(sigma_star_star_sq(&m).unwrap().abs() < 1e-12 * c * c.max(1.0));
        }
    }

    #[test]
    fn sigma_scaling_laws() {
        let base = pareto_moments(6.0).all_finite().unwrap();
        let m = MomentSet::from_values(base);
        let s1 = sigma_star_sq(&m).unwrap();
        let d1 = sigma_star_star_sq(&m).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = MomentSet::from_values([base[0] * c, base[1] * c * c, base[2] * c.powi(3), base[3] * c.powi(4)]);
            assert!(((sigma_star_sq(&scaled).unwrap() - s1) / s1).abs() < 1e-12);
            assert!(((sigma_star_star_sq(&scaled).unwrap() - c * c * d1) / (c * c * d1)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_rejects_infinite_moments() {
        assert!(matches!(sigma_star_sq(&pareto_moments(3.0)), Err(Error::RegimeViolation(_))));
        assert!(sigma_star_star_sq(&pareto_moments(3.5)).is_err());
    }

    /// Delta-method variance of g(m̂₁, m̂₂) computed from the gradient and the
    /// covariance of (X, X²), independently of the closed forms above.
    fn delta_method(m: [f64; 4], grad: impl Fn(f64, f64) -> (f64, f64)) -> f64 {
        let [m1, m2, m3, m4] = m;
        let (g1, g2) = grad(m1, m2);
        let v11 = m2 - m1 * m1;
        let v12 = m3 - m1 * m2;
        let v22 = m4 - m2 * m2;
        g1 * g1 * v11 + 2.0 * g1 * g2 * v12 + g2 * g2 * v22
    }

    #[test]
    fn sigma_formulas_agree_with_gradient_form() {
        for alpha in [5.0, 7.5, 12.0] {
            let m = pareto_moments(alpha).all_finite().unwrap();
            // nT = m₂/m₁²
            let ratio = delta_method(m, |a, b| (-2.0 * b / a.powi(3), 1.0 / (a * a)));
            // D = (m₂ − m₁²)/m₁ = m₂/m₁ − m₁
            let disp = delta_method(m, |a, b| (-b / (a * a) - 1.0, 1.0 / a));
            let ms = MomentSet::from_values(m);
            assert!(((sigma_star_sq(&ms).unwrap() - ratio) / ratio).abs() < 1e-12);
            assert!(((sigma_star_star_sq(&ms).unwrap() - disp) / disp).abs() < 1e-12);
        }
    }

    #[test]
    fn regime_validation() {
        let p3 = pareto_moments(3.0);
        let err = validate_regime(CaseId::C2, 3.0, &p3, Averaging::Distribution).unwrap_err();
        assert!(err.to_string().contains("α=1 and μ₁=∞"), "{err}");
        let err = validate_regime(CaseId::C5, 3.0, &p3, Averaging::Distribution).unwrap_err();
        assert!(err.to_string().contains("p-averaging"));
        assert!(validate_regime(CaseId::C5, 3.0, &p3, Averaging::Probability).is_ok());
        assert!(validate_regime(CaseId::C1, 0.7, &pareto_moments(0.7), Averaging::Distribution).is_ok());
        assert!(validate_regime(CaseId::C1, 1.5, &pareto_moments(1.5), Averaging::Distribution).is_err());
        assert!(validate_regime(CaseId::C3a, 1.5, &pareto_moments(1.5), Averaging::Distribution).is_ok());
        assert!(validate_regime(CaseId::C4b, 2.0, &pareto_moments(2.0), Averaging::Distribution).is_ok());
        assert!(validate_regime(CaseId::C6, 3.0, &p3, Averaging::Distribution).is_err());
        assert!(validate_regime(CaseId::C6, 5.0, &pareto_moments(5.0), Averaging::Distribution).is_ok());
        let lp = ParetoTypeModel::log_perturbed(1.0, -2.0, 1.0).unwrap().moment_set().unwrap();
        assert!(validate_regime(CaseId::C2, 1.0, &lp, Averaging::Distribution).is_err());
        assert!(validate_regime(CaseId::C3a, 1.0, &lp, Averaging::Distribution).is_ok());
    }

    #[test]
    fn case_id_parsing() {
        for c in CaseId::ALL {
            assert_eq!(c.as_str().parse::<CaseId>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert_eq!("3A".parse::<CaseId>().unwrap(), CaseId::C3a);
        assert!("7".parse::<CaseId>().is_err());
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn one_sided_stable_laplace() {
        let sampler = StableSampler::new(0.5).unwrap();
        let mut rng = substream(31, 0);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&w| w > 0.0));
        for r in [0.5f64, 1.0, 2.0] {
            let vals: Vec<f64> = draws.iter().map(|w| (-r * w).exp()).collect();
            let (emp, se) = mean_se(&vals);
            let theo = (-r.sqrt()).exp();
            assert!((emp - theo).abs() < 4.0 * se, "r={r}: {emp} ± {se} vs {theo}");
        }
    }

    #[test]
    fn one_sided_stable_tail_slope() {
        let sampler = StableSampler::new(0.5).unwrap();
        let mut rng = substream(32, 0);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
        let slope = crate::montecarlo::tail_slope(&draws, 0.01).unwrap();
        assert!((slope + 0.5).abs() < 0.05, "{slope}");
    }

    #[test]
    fn skewed_stable_is_centred() {
        let sampler = StableSampler::new(1.5).unwrap();
        let mut rng = substream(33, 0);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
        let (mean, se) = mean_se(&draws);
        assert!(mean.abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn skewed_stable_characteristic_exponent() {
        let p = 1.5;
        let sampler = StableSampler::new(p).unwrap();
        let mut rng = substream(34, 0);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
        let thetas: Vec<f64> = (0..8).map(|k| 0.5 * 2f64.powf(k as f64 * 3.0 / 7.0)).collect();
        let pts: Vec<(f64, f64)> = thetas
            .iter()
            .map(|&th| {
                let (c, s) = draws.iter().fold((0.0, 0.0), |(c, s), &x| (c + (th * x).cos(), s + (th * x).sin()));
                let n = draws.len() as f64;
                let modulus = ((c / n).powi(2) + (s / n).powi(2)).sqrt();
                (th.ln(), (-modulus.ln()).ln())
            })
            .collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - p).abs() < 0.05, "{slope}");
    }

    #[test]
    fn stable_rejects_unit_exponent() {
        assert!(StableSampler::new(1.0).is_err());
        assert!(StableSampler::new(2.0).is_err());
        assert!(sample_stable(0.0, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn reference_case4a_is_constant() {
        let mut m = pareto_moments(2.0);
        m.mu1 = Moment::Finite(2.0);
        let spec = LimitLawSpec::from_parts(CaseId::C4a, 2.0, degenerate(1.0), m);
        let mut rng = substream(0, 0);
        for _ in 0..10 {
            assert_eq!(limit_reference_sampler(&spec, StatisticKind::Ratio, &mut rng).unwrap(), 0.5);
        }
    }

    #[test]
    fn reference_case6_is_normal() {
        let spec = LimitLawSpec::from_parts(CaseId::C6, 5.0, degenerate(1.0), pareto_moments(5.0));
        let s = ReferenceSampler::new(&spec, StatisticKind::Ratio).unwrap();
        let mut rng = substream(40, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let sd = spec.sigma_star_sq.unwrap().sqrt();
        let normal = statrs::distribution::Normal::new(0.0, sd).unwrap();
        use statrs::distribution::ContinuousCDF;
        let d = crate::montecarlo::ks_distance(&xs, |x| normal.cdf(x));
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn reference_case3a_laplace() {
        let mut m = pareto_moments(1.5);
        m.mu1 = Moment::Finite(3.0);
        let spec = LimitLawSpec::from_parts(CaseId::C3a, 1.5, degenerate(1.0), m);
        let s = ReferenceSampler::new(&spec, StatisticKind::Ratio).unwrap();
        let mut rng = substream(41, 0);
        let vals: Vec<f64> = (0..200_000).map(|_| (-9.0 * s.sample(&mut rng)).exp()).collect();
        let (emp, se) = mean_se(&vals);
        let theo = (-gamma(0.25)).exp();
        assert!((emp - theo).abs() < 4.0 * se, "{emp} ± {se} vs {theo}");
    }

    #[test]
    fn reference_case3b_matches_joint_laplace() {
        // (μ₁² Λ² · output, μ₁Λ) = (U_α, μ₁Λ) must reproduce the corrected joint transform.
        let alpha = 1.5;
        let m = pareto_moments(alpha);
        let mu1 = m.mu1.finite().unwrap();
        let mixing = MixingLaw::gamma(3.0, 3.0).unwrap();
        let spec = LimitLawSpec::from_parts(CaseId::C3b, alpha, mixing, m);
        let stable = StableSampler::new(alpha / 2.0).unwrap();
        let mut rng = substream(42, 0);
        let pairs: Vec<(f64, f64)> = (0..200_000)
            .map(|_| {
                let lambda = mixing.sample(&mut rng);
                let u = (lambda * gamma(1.0 - alpha / 2.0)).powf(2.0 / alpha) * stable.sample(&mut rng);
                (u, mu1 * lambda)
            })
            .collect();
        for (r, s) in [(0.5, 0.5), (1.0, 1.0), (2.0, 0.25)] {
            let vals: Vec<f64> = pairs.iter().map(|(u, z)| (-r * u - s * z).exp()).collect();
            let (emp, se) = mean_se(&vals);
            let theo = lt_limit(&spec, r, s).unwrap();
            assert!((emp - theo).abs() < 4.0 * se, "({r},{s}): {emp} ± {se} vs {theo}");
        }
        assert!(ReferenceSampler::new(&spec, StatisticKind::Cov).is_ok());
    }

    #[test]
    fn reference_rejects_untractable_cases() {
        for case in [CaseId::C1, CaseId::C2, CaseId::C5] {
            let spec = LimitLawSpec::from_parts(case, 0.7, degenerate(1.0), pareto_moments(0.7));
            assert!(matches!(ReferenceSampler::new(&spec, StatisticKind::Ratio), Err(Error::Unsupported(_))));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn delta_zero_s_identity(alpha in 0.05f64..0.95, r in 0.01f64..50.0) {
            let d = delta_alpha(r, 0.0, alpha).unwrap();
            let exact = r.powf(alpha / 2.0) * gamma(1.0 - alpha / 2.0);
            prop_assert!(((d - exact) / exact).abs() < 1e-8);
        }

        #[test]
        fn lt_limit_stays_in_unit_interval(r in 0.0f64..20.0, s in 0.0f64..20.0, alpha in 0.1f64..0.9) {
            let spec = LimitLawSpec::from_parts(CaseId::C1, alpha, MixingLaw::gamma(2.0, 1.0).unwrap(), pareto_moments(alpha));
            let v = lt_limit(&spec, r, s).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
