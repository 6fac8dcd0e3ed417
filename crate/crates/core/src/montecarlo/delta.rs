use serde::{Deserialize, Serialize};

use crate::counting::CountingProcessModel;
use crate::distributions::{ClaimLaw, MomentSet};
use crate::error::{Error, Result};
use crate::limits::{sigma_star_sq, sigma_star_star_sq};

use super::ensemble::{simulate_ensemble, EnsembleSample};
use super::statistics::{risk_statistics, Targets};
use super::summary::variance;

/// Empirical against delta-method variances at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCheckRow {
    pub t: f64,
    pub replications: u64,
    pub skipped: u64,
    /// Variance of `√n(nT − μ₂/μ₁²)`.
    pub ratio_variance: f64,
    pub ratio_target: f64,
    /// Variance of `√n(ĈoVar − CoVar)`.
    pub cov_variance: f64,
    pub cov_target: f64,
    /// Variance of `√n(D̂ − D)`.
    pub dispersion_variance: f64,
    pub dispersion_target: f64,
}

impl DeltaCheckRow {
    /// Empirical over theoretical variance for the three statistics.
    pub fn ratios(&self) -> [f64; 3] {
        [
            self.ratio_variance / self.ratio_target,
            self.cov_variance / self.cov_target,
            self.dispersion_variance / self.dispersion_target,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCheckReport {
    pub sigma_star_sq: f64,
    pub cov_limit_variance: f64,
    pub sigma_star_star_sq: f64,
    pub rows: Vec<DeltaCheckRow>,
}

/// Delta-method limit variances `σ_*²`, `σ_*²μ₁²/(4σ²)` and `σ_**²` with the centring constants.
fn delta_targets(moments: &MomentSet) -> Result<(Targets, [f64; 3])> {
    let mu = moments
        .all_finite()
        .ok_or_else(|| Error::RegimeViolation("case 6 requires μ₄<∞".to_string()))?;
    let targets = Targets::from_moments(moments)?;
    let s_star = sigma_star_sq(moments)?;
    let var_x = mu[1] - mu[0] * mu[0];
    let cov_limit = if var_x > 0.0 { s_star * mu[0] * mu[0] / (4.0 * var_x) } else { 0.0 };
    Ok((targets, [s_star, cov_limit, sigma_star_star_sq(moments)?]))
}

/// One row of the delta-method check from an existing ensemble at time `t`.
pub fn delta_check_row(samples: &[EnsembleSample], t: f64, moments: &MomentSet) -> Result<DeltaCheckRow> {
    let (targets, [s_star, cov_limit, s_star_star]) = delta_targets(moments)?;
    let mut ratio = Vec::with_capacity(samples.len());
    let mut cov = Vec::with_capacity(samples.len());
    let mut disp = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for s in samples {
        let Some(r) = risk_statistics(s) else {
            skipped += 1;
            continue;
        };
        let root_n = (s.n as f64).sqrt();
        ratio.push(root_n * (s.n as f64 * r.t - targets.ratio));
        cov.push(root_n * (r.cov_hat - targets.cov));
        disp.push(root_n * (r.d_hat - targets.dispersion));
    }
    Ok(DeltaCheckRow {
        t,
        replications: samples.len() as u64,
        skipped,
        ratio_variance: variance(&ratio),
        ratio_target: s_star,
        cov_variance: variance(&cov),
        cov_target: cov_limit,
        dispersion_variance: variance(&disp),
        dispersion_target: s_star_star,
    })
}

/// Compares the `√n`-normalised variances of `nT`, `ĈoVar` and `D̂` with
/// `σ_*²`, `σ_*²μ₁²/(4σ²)` and `σ_**²` along a ladder of times.
///
/// Normalising by `√N` rather than `√t` removes the mixing variable from the limit.
pub fn case6_delta_check<D: ClaimLaw>(
    claims: &D,
    counting: &CountingProcessModel,
    t_ladder: &[f64],
    replications: u64,
    seed: u64,
) -> Result<DeltaCheckReport> {
    let moments = claims.moment_set()?;
    let (_, [s_star, cov_limit, s_star_star]) = delta_targets(&moments)?;
    let rows = t_ladder
        .iter()
        .map(|&t| {
            let samples = simulate_ensemble(claims, counting, t, replications, seed)?;
            delta_check_row(&samples, t, &moments)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaCheckReport {
        sigma_star_sq: s_star,
        cov_limit_variance: cov_limit,
        sigma_star_star_sq: s_star_star,
        rows,
    })
}
