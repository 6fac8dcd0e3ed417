//! Experiment configuration and the named presets used by the acceptance suite.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counting::{Averaging, CountingSpec};
use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};
use crate::limits::{Case3bLt, CaseId, LimitLawSpec};
use crate::montecarlo::LaplaceGrid;

/// Gate thresholds. Every field has a default, so a config may override any subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest `|emp − theo|` allowed on the Laplace grid at the last `t`.
    pub laplace_final: f64,
    /// Two-sample KS distance allowed between a statistic and its limit's reference sample.
    pub ks: f64,
    /// Relative error allowed for the median of a statistic with a constant limit.
    pub median_rel: f64,
    /// Relative error allowed between delta-method and empirical variances.
    pub delta_variance_rel: f64,
    /// KS distance allowed between a centred statistic and its normal limit.
    pub normal_ks: f64,
    /// Relative error allowed for the mean of `N·T` around `μ₂/μ₁²`.
    pub consistency_rel: f64,
    /// Two-sample KS distance allowed between the last two rungs of the ladder.
    pub stabilization_ks: f64,
    /// Absolute error allowed for the right-tail log-log slope.
    pub tail_slope_abs: f64,
    /// Fraction of the largest values used for the tail slope.
    pub tail_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            laplace_final: 0.01,
            ks: 0.05,
            median_rel: 0.10,
            delta_variance_rel: 0.15,
            normal_ks: 0.02,
            consistency_rel: 0.02,
            stabilization_ks: 0.03,
            tail_slope_abs: 0.2,
            tail_fraction: 0.01,
        }
    }
}

pub const DEFAULT_T_LADDER: [f64; 3] = [1e2, 1e3, 1e4];
pub const DEFAULT_REPLICATIONS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

fn default_t_ladder() -> Vec<f64> {
    DEFAULT_T_LADDER.to_vec()
}

fn default_replications() -> u64 {
    DEFAULT_REPLICATIONS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment: a claim law, a counting process, a case and the simulation sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub counting: CountingSpec,
    pub case: CaseId,
    #[serde(default = "default_t_ladder")]
    pub t_ladder: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Defaults to [`LaplaceGrid::default_for`] the case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplace_grid: Option<LaplaceGrid>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub case3b_lt: Case3bLt,
}

impl ExperimentConfig {
    pub fn new(distribution: DistributionSpec, counting: CountingSpec, case: CaseId) -> Self {
        Self {
            distribution,
            counting,
            case,
            t_ladder: default_t_ladder(),
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            laplace_grid: None,
            out_dir: default_out_dir(),
            tolerances: Tolerances::default(),
            case3b_lt: Case3bLt::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The grid in force, filling in the case default.
    pub fn grid(&self) -> LaplaceGrid {
        self.laplace_grid.clone().unwrap_or_else(|| LaplaceGrid::default_for(self.case))
    }

    /// Copy with every defaulted field made explicit, as echoed into reports.
    pub fn resolved(&self) -> Self {
        Self {
            laplace_grid: Some(self.grid()),
            ..self.clone()
        }
    }

    /// Checks sizes, builds both models and validates the case's regime hypotheses.
    pub fn validate(&self) -> Result<LimitLawSpec> {
        if self.t_ladder.is_empty() {
            return Err(invalid("t_ladder must not be empty"));
        }
        if self.t_ladder.iter().any(|t| !(t.is_finite() && *t > 1.0)) {
            return Err(invalid("every t in t_ladder must be finite and greater than 1"));
        }
        if self.t_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t_ladder must be strictly increasing"));
        }
        if self.replications < 2 {
            return Err(invalid("replications must be at least 2"));
        }
        let grid = self.grid();
        if grid.r.iter().chain(&grid.s).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("laplace grid values must be finite and nonnegative"));
        }
        let claims = self.distribution.build()?;
        let counting = self.counting.build()?;
        Ok(LimitLawSpec::new(self.case, &claims, &counting)?.with_case3b_lt(self.case3b_lt))
    }
}

/// Named configurations, one or more per case.
pub const PRESETS: [&str; 10] = [
    "pareto07-poisson",
    "pareto07-gamma",
    "pareto1-poisson",
    "pareto15-deterministic",
    "pareto15-poisson",
    "pareto2-poisson",
    "pareto2-deterministic",
    "pareto3-poisson",
    "pareto5-poisson",
    "pareto5-gamma",
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let pareto = DistributionSpec::exact_pareto;
    let cfg = match name {
        "pareto07-poisson" => ExperimentConfig::new(pareto(0.7), CountingSpec::poisson(1.0), CaseId::C1),
        "pareto07-gamma" => ExperimentConfig::new(pareto(0.7), CountingSpec::mixed_poisson_gamma(3.0, 3.0), CaseId::C1),
        "pareto1-poisson" => ExperimentConfig::new(pareto(1.0), CountingSpec::poisson(1.0), CaseId::C2),
        "pareto15-deterministic" => ExperimentConfig::new(pareto(1.5), CountingSpec::deterministic(), CaseId::C3a),
        "pareto15-poisson" => ExperimentConfig::new(pareto(1.5), CountingSpec::poisson(1.0), CaseId::C3b),
        "pareto2-poisson" => ExperimentConfig::new(pareto(2.0), CountingSpec::poisson(1.0), CaseId::C4a),
        "pareto2-deterministic" => ExperimentConfig::new(pareto(2.0), CountingSpec::deterministic(), CaseId::C4b),
        "pareto3-poisson" => ExperimentConfig {
            t_ladder: vec![5e3, 1e4],
            ..ExperimentConfig::new(
                pareto(3.0),
                CountingSpec::poisson(1.0).with_averaging(Averaging::Probability),
                CaseId::C5,
            )
        },
        "pareto5-poisson" => ExperimentConfig {
            t_ladder: vec![2e3],
            replications: 20_000,
            ..ExperimentConfig::new(pareto(5.0), CountingSpec::poisson(1.0), CaseId::C6)
        },
        "pareto5-gamma" => ExperimentConfig {
            t_ladder: vec![2e3],
            replications: 20_000,
            ..ExperimentConfig::new(pareto(5.0), CountingSpec::mixed_poisson_gamma(3.0, 3.0), CaseId::C6)
        },
        other => {
            return Err(invalid(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

/// The preset `verify --case` runs when none is named.
pub fn default_preset_for(case: CaseId) -> &'static str {
    match case {
        CaseId::C1 => "pareto07-poisson",
        CaseId::C2 => "pareto1-poisson",
        CaseId::C3a => "pareto15-deterministic",
        CaseId::C3b => "pareto15-poisson",
        CaseId::C4a => "pareto2-poisson",
        CaseId::C4b => "pareto2-deterministic",
        CaseId::C5 => "pareto3-poisson",
        CaseId::C6 => "pareto5-poisson",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for case in CaseId::ALL {
            assert_eq!(preset(default_preset_for(case)).unwrap().case, case);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{
            "distribution": {"family": "exact_pareto", "alpha": 0.7},
            "counting": {"kind": "poisson", "lambda": 1},
            "case": "1"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.t_ladder, DEFAULT_T_LADDER.to_vec());
        assert_eq!(cfg.replications, DEFAULT_REPLICATIONS);
        assert_eq!(cfg.tolerances, Tolerances::default());
        let back = ExperimentConfig::from_json(&cfg.resolved().to_json().unwrap()).unwrap();
        assert_eq!(back, cfg.resolved());
    }

    #[test]
    fn partial_tolerance_override() {
        let text = r#"{
            "distribution": {"family": "exact_pareto", "alpha": 0.7},
            "counting": {"kind": "poisson", "lambda": 1},
            "case": "1",
            "tolerances": {"laplace_final": 0.2}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.tolerances.laplace_final, 0.2);
        assert_eq!(cfg.tolerances.ks, Tolerances::default().ks);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{
            "distribution": {"family": "exact_pareto", "alpha": 0.7},
            "counting": {"kind": "poisson", "lambda": 1},
            "case": "1",
            "replicatons": 5
        }"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn regime_errors_name_the_hypothesis() {
        let cfg = ExperimentConfig::new(DistributionSpec::exact_pareto(3.0), CountingSpec::poisson(1.0), CaseId::C2);
        match cfg.validate() {
            Err(Error::RegimeViolation(msg)) => assert!(msg.contains("α=1 and μ₁=∞"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let cfg = ExperimentConfig::new(DistributionSpec::exact_pareto(3.0), CountingSpec::poisson(1.0), CaseId::C5);
        match cfg.validate() {
            Err(Error::RegimeViolation(msg)) => assert!(msg.contains("p-averaging"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ladder_checks() {
        let mut cfg = preset("pareto07-poisson").unwrap();
        cfg.t_ladder = vec![100.0, 10.0];
        assert!(cfg.validate().is_err());
        cfg.t_ladder = vec![];
        assert!(cfg.validate().is_err());
        cfg.t_ladder = vec![0.5];
        assert!(cfg.validate().is_err());
    }
}
