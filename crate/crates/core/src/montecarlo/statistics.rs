use serde::{Deserialize, Serialize};

use crate::distributions::MomentSet;
use crate::error::{Error, Result};
use crate::limits::{CaseId, StatisticKind};
use crate::normalizers::NormalizerTable;

use super::ensemble::EnsembleSample;

/// Sample coefficient of variation and dispersion of one replication, with the ratios they derive from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskStatistics {
    pub mean: f64,
    pub variance: f64,
    pub cov_hat: f64,
    pub d_hat: f64,
    pub t: f64,
    pub c: f64,
    /// Set when rounding made the sample variance negative and it was clamped to zero.
    pub clamped: bool,
}

/// `X̄`, `S² = s2/n − X̄²`, `S/X̄`, `S²/X̄`, `T` and `C`; `None` when `n = 0`.
pub fn risk_statistics(sample: &EnsembleSample) -> Option<RiskStatistics> {
    let t = sample.ratio()?;
    let c = sample.c_ratio()?;
    let n = sample.n as f64;
    let mean = sample.s1 / n;
    let raw = sample.s2() / n - mean * mean;
    let clamped = raw < 0.0;
    let variance = raw.max(0.0);
    Some(RiskStatistics {
        mean,
        variance,
        cov_hat: variance.sqrt() / mean,
        d_hat: variance / mean,
        t,
        c,
        clamped,
    })
}

/// Centring constants for Cases 5 and 6: `μ₂/μ₁²`, `CoVar(X)` and `D(X) = σ²/μ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub ratio: f64,
    pub cov: f64,
    pub dispersion: f64,
}

impl Targets {
    pub fn from_moments(m: &MomentSet) -> Result<Self> {
        let (m1, m2) = match (m.mu1.finite(), m.mu2.finite()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::RegimeViolation(
                    "centred statistics need finite μ₁ and μ₂".to_string(),
                ))
            }
        };
        let var = m2 - m1 * m1;
        Ok(Self {
            ratio: m2 / (m1 * m1),
            cov: var.sqrt() / m1,
            dispersion: var / m1,
        })
    }

    pub fn get(&self, kind: StatisticKind) -> f64 {
        match kind {
            StatisticKind::Ratio => self.ratio,
            StatisticKind::Cov => self.cov,
            StatisticKind::Dispersion => self.dispersion,
        }
    }
}

/// The scaled left-hand side of the case's limit theorem for one replication.
///
/// Returns `Ok(None)` when `n = 0`. `targets` is needed only for Cases 5 and 6.
pub fn statistic(
    case: CaseId,
    kind: StatisticKind,
    sample: &EnsembleSample,
    norms: &NormalizerTable,
    targets: Option<&Targets>,
) -> Result<Option<f64>> {
    let Some(risk) = risk_statistics(sample) else {
        return Ok(None);
    };
    let n = sample.n as f64;
    let t = norms.t;
    let a = norms.a_t;
    let centred = |scale: f64| -> Result<f64> {
        let tg = targets.ok_or_else(|| {
            Error::InvalidParameter(format!("case {case} statistic needs centring targets"))
        })?;
        let x = match kind {
            StatisticKind::Ratio => n * risk.t,
            StatisticKind::Cov => risk.cov_hat,
            StatisticKind::Dispersion => risk.d_hat,
        };
        Ok(scale * (x - tg.get(kind)))
    };
    let value = match (case, kind) {
        (CaseId::C1, StatisticKind::Ratio) => risk.t,
        (CaseId::C1, StatisticKind::Cov) => risk.cov_hat / n.sqrt(),
        (CaseId::C1, StatisticKind::Dispersion) => risk.d_hat / a,
        (CaseId::C2, StatisticKind::Ratio) => (norms.a_prime()? / a).powi(2) * risk.t,
        (CaseId::C2, StatisticKind::Cov) => norms.a_prime()? / a * risk.cov_hat / n.sqrt(),
        (CaseId::C2, StatisticKind::Dispersion) => norms.a_prime()? / (a * a) * risk.d_hat,
        (CaseId::C3a, StatisticKind::Ratio) => (n / a).powi(2) * risk.t,
        (CaseId::C3a, StatisticKind::Cov) => n.sqrt() / a * risk.cov_hat,
        (CaseId::C3a, StatisticKind::Dispersion) => n / (a * a) * risk.d_hat,
        (CaseId::C3b, StatisticKind::Ratio) => (t / a).powi(2) * risk.t,
        (CaseId::C3b, StatisticKind::Cov) => t / a * risk.cov_hat / n.sqrt(),
        (CaseId::C3b, StatisticKind::Dispersion) => t / (a * a) * risk.d_hat,
        (CaseId::C4a, StatisticKind::Ratio) => (n / norms.a_prime()?).powi(2) * risk.t,
        (CaseId::C4a, StatisticKind::Cov) => n.sqrt() / norms.a_prime()? * risk.cov_hat,
        (CaseId::C4a, StatisticKind::Dispersion) => n / norms.a_prime()?.powi(2) * risk.d_hat,
        (CaseId::C4b, StatisticKind::Ratio) => (t / norms.a_prime()?).powi(2) * risk.t,
        (CaseId::C4b, StatisticKind::Cov) => t / norms.a_prime()? * risk.cov_hat / n.sqrt(),
        (CaseId::C4b, StatisticKind::Dispersion) => t / norms.a_prime()?.powi(2) * risk.d_hat,
        (CaseId::C5, _) => centred(norms.b()?)?,
        (CaseId::C6, _) => centred(t.sqrt())?,
    };
    Ok(Some(value))
}

/// The pair whose joint Laplace transform converges in the case's theorem.
pub fn laplace_pair(case: CaseId, sample: &EnsembleSample, norms: &NormalizerTable) -> Result<(f64, f64)> {
    let a = norms.a_t;
    let t = norms.t;
    Ok(match case {
        CaseId::C1 => (sample.s2_over_sq(a), sample.s1 / a),
        CaseId::C2 => (sample.s2_over_sq(a), sample.s1 / norms.a_prime()?),
        CaseId::C3b => (sample.s2_over_sq(a), sample.s1 / t),
        CaseId::C4b => (sample.s2_over_sq(norms.a_prime()?), sample.s1 / t),
        other => {
            return Err(Error::Unsupported(format!(
                "case {other} has no joint Laplace pair"
            )))
        }
    })
}

/// Scaled statistics for every replication of one `(case, kind, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSeries {
    pub case: CaseId,
    pub kind: StatisticKind,
    pub t: f64,
    pub values: Vec<f64>,
    /// Replications with `N(t) = 0`, which are left out of `values`.
    pub n_skipped: u64,
}

impl StatisticSeries {
    pub fn build(
        case: CaseId,
        kind: StatisticKind,
        samples: &[EnsembleSample],
        norms: &NormalizerTable,
        targets: Option<&Targets>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(samples.len());
        let mut n_skipped = 0;
        for s in samples {
            match statistic(case, kind, s, norms, targets)? {
                Some(v) => values.push(v),
                None => n_skipped += 1,
            }
        }
        Ok(Self {
            case,
            kind,
            t: norms.t,
            values,
            n_skipped,
        })
    }
}
