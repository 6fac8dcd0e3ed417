//! The acceptance suite: criteria A1–A10, each reduced to one pass/fail outcome.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{preset, ExperimentConfig};
use crate::counting::{CountingProcessModel, Interarrival};
use crate::distributions::{ParetoTypeModel, PointMass};
use crate::error::{invalid, Result};
use crate::experiment::{run, RunReport, VERSION};
use crate::limits::{delta_alpha, delta_alpha_at_zero_r, CaseId, StableSampler};
use crate::montecarlo::summary::mean_and_se;
use crate::montecarlo::{risk_statistics, simulate_ensemble};
use crate::normalizers::NormalizerTable;
use crate::numerics::gamma;
use crate::rng::{stage_seed, substream};

pub const CRITERIA: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

/// Size of the suite relative to the stated criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Multiplies every replication and draw count; 1 is the stated size.
    pub scale: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: crate::config::DEFAULT_SEED,
            scale: 1.0,
        }
    }
}

impl SuiteOptions {
    /// Scale used for the repeated runs inside the determinism criterion.
    pub const DETERMINISM_SCALE: f64 = 0.01;

    fn count(&self, stated: u64) -> u64 {
        ((stated as f64 * self.scale).round() as u64).max(200)
    }

    fn seed_for(&self, id: &str) -> u64 {
        stage_seed(self.seed, id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub measurements: BTreeMap<String, f64>,
}

impl CriterionOutcome {
    /// One line: `A4 PASS  title: detail`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{:<4}{verdict}  {}: {}", self.id, self.title, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: String,
    pub options: SuiteOptions,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

struct Builder {
    id: &'static str,
    title: &'static str,
    checks: Vec<(String, bool)>,
    measurements: BTreeMap<String, f64>,
}

impl Builder {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            checks: Vec::new(),
            measurements: BTreeMap::new(),
        }
    }

    fn measure(&mut self, key: impl Into<String>, value: f64) {
        self.measurements.insert(key.into(), value);
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn finish(self) -> CriterionOutcome {
        let passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.1);
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let detail = if passed {
            format!("{} checks", self.checks.len())
        } else {
            format!("failed: {}", failed.join("; "))
        };
        CriterionOutcome {
            id: self.id.to_string(),
            title: self.title.to_string(),
            passed,
            detail,
            measurements: self.measurements,
        }
    }
}

/// Runs one criterion by id.
pub fn criterion(id: &str, opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let out = match id {
        "A1" => identities(opts),
        "A2" => normalizer_exactness(),
        "A3" => delta_quadrature(),
        "A4" => case1_laplace(opts),
        "A5" => case4b_constant(opts),
        "A6" => case6_delta(opts),
        "A7" => case5_scale_free(opts),
        "A8" => stable_sampler(opts),
        "A9" => counting_averaging(opts),
        "A10" => determinism(opts),
        other => Err(invalid(format!("unknown criterion `{other}`"))),
    }?;
    eprintln!("{id}: {:.1}s", started.elapsed().as_secs_f64());
    Ok(out)
}

/// Runs the listed criteria in order.
pub fn run_suite(ids: &[&str], opts: &SuiteOptions) -> Result<SuiteReport> {
    let criteria = ids.iter().map(|id| criterion(id, opts)).collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport {
        version: VERSION.to_string(),
        options: *opts,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}

fn identities(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A1", "identity suite");
    let reps = opts.count(100_000);
    let setups = [
        ("pareto07_poisson", ParetoTypeModel::exact_pareto(0.7, 1.0)?, CountingProcessModel::poisson(1.0)?),
        ("pareto25_gamma", ParetoTypeModel::exact_pareto(2.5, 1.0)?, CountingProcessModel::mixed_poisson_gamma(3.0, 3.0)?),
    ];
    for (label, claims, counting) in setups {
        let samples = simulate_ensemble(&claims, &counting, 100.0, reps, opts.seed_for("A1"))?;
        let (mut cov_err, mut d_err, mut bound_violations) = (0.0f64, 0.0f64, 0u64);
        for s in &samples {
            let Some(r) = risk_statistics(s) else { continue };
            let n = s.n as f64;
            cov_err = cov_err.max((r.cov_hat * r.cov_hat - (n * r.t - 1.0)).abs() / (n * r.t));
            d_err = d_err.max((r.d_hat - (r.c - r.mean)).abs() / r.c);
            // Relative slack of a few ulps on the Cauchy–Schwarz bounds.
            if !(r.t * n >= 1.0 - 1e-14 && r.t <= 1.0 + 1e-14) {
                bound_violations += 1;
            }
        }
        b.measure(format!("{label}_cov_identity_rel"), cov_err);
        b.measure(format!("{label}_dispersion_identity_rel"), d_err);
        b.measure(format!("{label}_bound_violations"), bound_violations as f64);
        b.check(format!("{label} cov_hat² = N·T − 1 to 1e-12 (got {cov_err:.1e})"), cov_err <= 1e-12);
        b.check(format!("{label} d_hat = C − X̄ to 1e-12 (got {d_err:.1e})"), d_err <= 1e-12);
        b.check(format!("{label} 1/N ≤ T ≤ 1 ({bound_violations} violations)"), bound_violations == 0);
    }
    Ok(b.finish())
}

fn normalizer_exactness() -> Result<CriterionOutcome> {
    let mut b = Builder::new("A2", "normalizer exactness");
    let (mut a_err, mut resid) = (0.0f64, 0.0f64);
    for alpha in [0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0] {
        let model = ParetoTypeModel::exact_pareto(alpha, 1.0)?;
        let moments = crate::distributions::ClaimLaw::moment_set(&model)?;
        for t in [1e2, 1e3, 1e4] {
            for case in CaseId::ALL {
                let averaging = crate::counting::Averaging::Probability;
                if crate::limits::validate_regime(case, alpha, &moments, averaging).is_err() {
                    continue;
                }
                let table = NormalizerTable::for_case(&model, case, t)?;
                a_err = a_err.max((table.a_t / t.powf(1.0 / alpha) - 1.0).abs());
                for (_, r) in table.residuals(&model) {
                    resid = resid.max(r);
                }
            }
        }
    }
    b.measure("a_t_rel_error", a_err);
    b.measure("max_residual", resid);
    b.check(format!("a_t = t^(1/α) to 1e-10 (got {a_err:.1e})"), a_err <= 1e-10);
    b.check(format!("defining-equation residuals ≤ 1e-9 (got {resid:.1e})"), resid <= 1e-9);
    Ok(b.finish())
}

fn delta_quadrature() -> Result<CriterionOutcome> {
    let mut b = Builder::new("A3", "δ_α quadrature");
    let mut worst = 0.0f64;
    for alpha in [0.2, 0.5, 0.8] {
        for r in [0.25, 1.0, 4.0] {
            let d = delta_alpha(r, 0.0, alpha)?;
            let closed = r.powf(alpha / 2.0) * gamma(1.0 - alpha / 2.0);
            worst = worst.max((d - closed).abs() / d);
        }
    }
    b.measure("closed_form_rel_error", worst);
    b.check(format!("δ_α(r,0) = r^(α/2)Γ(1−α/2) to 1e-7 (got {worst:.1e})"), worst <= 1e-7);
    let mut worst_zero = 0.0f64;
    for alpha in [0.2, 0.5, 0.8] {
        for s in [0.5, 1.0, 2.0] {
            let d = delta_alpha(1e-6, s, alpha)?;
            let lim = delta_alpha_at_zero_r(s, alpha);
            worst_zero = worst_zero.max((d - lim).abs() / lim);
        }
    }
    b.measure("zero_r_rel_error", worst_zero);
    b.check(
        format!("r → 0 limit s^αΓ(1−α) to 1e-3 at r = 1e-6 (got {worst_zero:.1e})"),
        worst_zero <= 1e-3,
    );
    Ok(b.finish())
}

fn scaled_preset(name: &str, id: &str, opts: &SuiteOptions) -> Result<ExperimentConfig> {
    let mut cfg = preset(name)?;
    cfg.replications = opts.count(cfg.replications);
    cfg.seed = opts.seed_for(id);
    Ok(cfg)
}

/// Records every gate of a run, with a prefix, and checks the named ones.
fn gates_of(b: &mut Builder, prefix: &str, report: &RunReport, required: &[&str]) {
    for g in &report.gates {
        if let Some(v) = g.value {
            b.measure(format!("{prefix}{}", g.name), v);
        }
    }
    for name in required {
        match report.gates.iter().find(|g| g.name == *name) {
            Some(g) => {
                let value = g.value.map_or("n/a".to_string(), |v| format!("{v:.4}"));
                b.check(
                    format!("{prefix}{} = {value} vs {} ({})", g.name, g.threshold, g.rule),
                    g.passed,
                );
            }
            None => b.check(format!("{prefix}{name} missing"), false),
        }
    }
}

fn case1_laplace(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A4", "case 1 Laplace convergence");
    for (name, prefix) in [("pareto07-poisson", "poisson_"), ("pareto07-gamma", "gamma_")] {
        let report = run(&scaled_preset(name, "A4", opts)?)?.report;
        for l in &report.ladder {
            if let Some(lt) = l.laplace {
                b.measure(format!("{prefix}max_abs_deviation_t{}", l.t), lt.max_abs_deviation);
            }
        }
        gates_of(&mut b, prefix, &report, &["laplace_decreasing", "laplace_final"]);
    }
    Ok(b.finish())
}

fn case4b_constant(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A5", "case 4(b) constant limit");
    let report = run(&scaled_preset("pareto2-deterministic", "A5", opts)?)?.report;
    for l in &report.ladder {
        if let Some(m) = l.statistics[0].median {
            b.measure(format!("median_t{}", l.t), m);
        }
        if let Some(q) = l.statistics[0].iqr {
            b.measure(format!("iqr_t{}", l.t), q);
        }
    }
    gates_of(&mut b, "", &report, &["median_ratio", "iqr_shrinking_ratio"]);
    Ok(b.finish())
}

fn case6_delta(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A6", "case 6 delta-method variance");
    let report = run(&scaled_preset("pareto5-poisson", "A6", opts)?)?.report;
    if let Some(row) = report.ladder.last().and_then(|l| l.delta) {
        b.measure("ratio_variance", row.ratio_variance);
        b.measure("ratio_target", row.ratio_target);
        b.measure("cov_variance", row.cov_variance);
        b.measure("cov_target", row.cov_target);
        b.measure("dispersion_variance", row.dispersion_variance);
        b.measure("dispersion_target", row.dispersion_target);
    }
    gates_of(
        &mut b,
        "",
        &report,
        &[
            "delta_variance_ratio",
            "normal_ks_ratio",
            "delta_variance_cov",
            "normal_ks_cov",
            "delta_variance_dispersion",
            "normal_ks_dispersion",
        ],
    );
    Ok(b.finish())
}

fn case5_scale_free(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A7", "case 5 scale-free checks");
    let report = run(&scaled_preset("pareto3-poisson", "A7", opts)?)?.report;
    if let Some(m) = report.ladder.last().and_then(|l| l.nt_mean) {
        b.measure("nt_mean", m);
    }
    gates_of(&mut b, "", &report, &["consistency", "stabilization_ks", "tail_slope"]);
    Ok(b.finish())
}

fn stable_sampler(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A8", "stable sampler");
    let draws = opts.count(1_000_000);
    let sampler = StableSampler::new(0.5)?;
    let seed = opts.seed_for("A8");
    let xs: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| sampler.sample(&mut substream(seed, i)))
        .collect();
    for r in [0.5, 1.0, 2.0] {
        let vals: Vec<f64> = xs.iter().map(|x| (-r * x).exp()).collect();
        let (emp, se) = mean_and_se(&vals);
        let theo = (-r.sqrt()).exp();
        let z = (emp - theo).abs() / se;
        b.measure(format!("z_r{r}"), z);
        b.check(format!("r = {r}: |emp − e^(−√r)| = {z:.2} SE ≤ 4"), z <= 4.0);
    }
    Ok(b.finish())
}

fn counting_averaging(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A9", "counting-process averaging");
    let t = 1e4;
    let reps = opts.count(10_000);
    let models = [
        ("deterministic", CountingProcessModel::deterministic()),
        ("poisson", CountingProcessModel::poisson(1.0)?),
        ("mixed_poisson_gamma", CountingProcessModel::mixed_poisson_gamma(3.0, 3.0)?),
        ("renewal", CountingProcessModel::renewal(Interarrival::Exponential { rate: 1.0 })?),
    ];
    for (label, m) in models {
        let seed = opts.seed_for(&format!("A9/{label}"));
        let counts = (0..reps)
            .into_par_iter()
            .map(|r| m.sample_count(t, &mut substream(seed, r)).map(|n| n as f64 / t))
            .collect::<Result<Vec<f64>>>()?;
        for theta in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let vals: Vec<f64> = counts.iter().map(|x| (-theta * x).exp()).collect();
            let (emp, se) = mean_and_se(&vals);
            let dev = (emp - m.mixing().laplace(theta)).abs();
            b.measure(format!("{label}_dev_theta{theta}"), dev);
            b.measure(format!("{label}_se_theta{theta}"), se);
            if let Some(exact) = finite_t_laplace(label, theta, t) {
                b.measure(format!("{label}_finite_t_dev_in_se_theta{theta}"), (emp - exact).abs() / se);
            }
            // A degenerate N(t)/t has zero SE; allow rounding error only.
            b.check(
                format!("{label} θ = {theta}: deviation {dev:.2e} vs 4 SE = {:.2e}", 4.0 * se),
                dev <= (4.0 * se).max(1e-12),
            );
        }
    }
    Ok(b.finish())
}

/// `E[e^{−θN(t)/t}]` at finite `t` for the unit-rate laws used in A9, to separate sampler error from finite-t bias.
fn finite_t_laplace(label: &str, theta: f64, t: f64) -> Option<f64> {
    let poisson_exponent = t * (-theta / t).exp_m1();
    match label {
        "poisson" | "renewal" => Some(poisson_exponent.exp()),
        "mixed_poisson_gamma" => Some((1.0 - poisson_exponent / 3.0).powf(-3.0)),
        _ => None,
    }
}

fn determinism(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut b = Builder::new("A10", "determinism");
    let reduced = SuiteOptions {
        scale: opts.scale * SuiteOptions::DETERMINISM_SCALE,
        ..*opts
    };
    let ids = &CRITERIA[..9];
    let in_pool = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        let report = pool.install(|| run_suite(ids, &reduced))?;
        Ok(serde_json::to_string_pretty(&report)?)
    };
    let first = in_pool(1)?;
    let second = in_pool(1)?;
    let eight = in_pool(8)?;
    b.measure("report_bytes", first.len() as f64);
    b.check("two runs with the same seed give byte-identical reports", first == second);
    b.check("1-thread and 8-thread runs give byte-identical reports", first == eight);

    let claims = PointMass(1.0);
    let counting = CountingProcessModel::mixed_poisson_gamma(2.0, 2.0)?;
    let ensemble = |threads: usize| -> Result<Vec<(u64, u64)>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        Ok(pool
            .install(|| simulate_ensemble(&claims, &counting, 50.0, 1_000, opts.seed))?
            .iter()
            .map(|s| (s.n, s.s1.to_bits()))
            .collect())
    };
    b.check("ensemble draws match across thread counts", ensemble(1)? == ensemble(8)?);
    Ok(b.finish())
}
