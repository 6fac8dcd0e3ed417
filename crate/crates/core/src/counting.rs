//! Counting processes `N(t)` whose normalised counts `N(t)/t` settle to a
//! positive mixing variable `Λ`, and the closed-form Laplace transforms of `Λ`.
//!
//! Only the marginal `N(t)` at a single `t` is ever drawn; no paths are stored.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Moment, ParetoTypeModel};
use crate::error::{invalid, Error, Result};

/// Default ceiling on simulated renewal arrivals per draw.
pub const DEFAULT_RENEWAL_CAP: u64 = 1_000_000_000;

/// Limit law of `N(t)/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingLaw {
    Degenerate { lambda: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl MixingLaw {
    pub fn degenerate(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self::Degenerate { lambda })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        check_positive("gamma_shape", shape)?;
        check_positive("gamma_rate", rate)?;
        Ok(Self::Gamma { shape, rate })
    }

    /// `E e^{-θΛ}`.
    pub fn laplace(&self, theta: f64) -> f64 {
        match *self {
            Self::Degenerate { lambda } => (-theta * lambda).exp(),
            Self::Gamma { shape, rate } => (1.0 + theta / rate).powf(-shape),
        }
    }

    /// `E Λ⁻¹`.
    pub fn inverse_mean(&self) -> Moment {
        match *self {
            Self::Degenerate { lambda } => Moment::Finite(1.0 / lambda),
            Self::Gamma { shape, rate } if shape > 1.0 => Moment::Finite(rate / (shape - 1.0)),
            Self::Gamma { .. } => Moment::Infinite,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Degenerate { lambda } => lambda,
            Self::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Self::Degenerate { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Degenerate { lambda } => lambda,
            Self::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }
}

/// Mode in which `N(t)/t` converges to `Λ`: in distribution or in probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Averaging {
    #[default]
    #[serde(rename = "D", alias = "d")]
    Distribution,
    #[serde(rename = "p", alias = "P")]
    Probability,
}

/// Interarrival law of a renewal process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interarrival {
    Exponential { rate: f64 },
    ParetoType(ParetoTypeModel),
}

impl Interarrival {
    fn mean(&self) -> Result<f64> {
        match self {
            Self::Exponential { rate } => Ok(1.0 / rate),
            Self::ParetoType(m) => m.moment(1.0)?.finite().ok_or_else(|| {
                Error::RegimeViolation(
                    "renewal interarrivals need a finite mean for N(t)/t to settle".to_string(),
                )
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountingKind {
    Deterministic,
    HomogeneousPoisson { lambda: f64 },
    MixedPoissonGamma { shape: f64, rate: f64 },
    Renewal { interarrival: Interarrival },
}

/// A counting process together with its mixing law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingProcessModel {
    kind: CountingKind,
    mixing: MixingLaw,
    averaging: Averaging,
    renewal_cap: u64,
}

impl CountingProcessModel {
    pub fn deterministic() -> Self {
        Self {
            kind: CountingKind::Deterministic,
            mixing: MixingLaw::Degenerate { lambda: 1.0 },
            averaging: Averaging::default(),
            renewal_cap: DEFAULT_RENEWAL_CAP,
        }
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Ok(Self {
            kind: CountingKind::HomogeneousPoisson { lambda },
            mixing: MixingLaw::degenerate(lambda)?,
            averaging: Averaging::default(),
            renewal_cap: DEFAULT_RENEWAL_CAP,
        })
    }

    pub fn mixed_poisson_gamma(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self {
            kind: CountingKind::MixedPoissonGamma { shape, rate },
            mixing: MixingLaw::gamma(shape, rate)?,
            averaging: Averaging::default(),
            renewal_cap: DEFAULT_RENEWAL_CAP,
        })
    }

    /// Rejects interarrival laws with infinite mean.
    pub fn renewal(interarrival: Interarrival) -> Result<Self> {
        if let Interarrival::Exponential { rate } = interarrival {
            check_positive("renewal exponential rate", rate)?;
        }
        let mean = interarrival.mean()?;
        Ok(Self {
            kind: CountingKind::Renewal { interarrival },
            mixing: MixingLaw::degenerate(1.0 / mean)?,
            averaging: Averaging::default(),
            renewal_cap: DEFAULT_RENEWAL_CAP,
        })
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_renewal_cap(mut self, cap: u64) -> Self {
        self.renewal_cap = cap;
        self
    }

    pub fn kind(&self) -> CountingKind {
        self.kind
    }

    pub fn mixing(&self) -> MixingLaw {
        self.mixing
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }

    /// Draws `N(t)`.
    pub fn sample_count<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<u64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("time must be finite and nonnegative, got {t}")));
        }
        match self.kind {
            CountingKind::Deterministic => Ok(t.floor() as u64),
            CountingKind::HomogeneousPoisson { lambda } => poisson_draw(lambda * t, rng),
            CountingKind::MixedPoissonGamma { .. } => {
                let intensity = self.mixing.sample(rng);
                poisson_draw(intensity * t, rng)
            }
            CountingKind::Renewal { interarrival } => {
                let mut clock = 0.0;
                let mut n = 0u64;
                loop {
                    clock += match interarrival {
                        Interarrival::Exponential { rate } => {
                            Exp::new(rate).expect("validated exponential rate").sample(rng)
                        }
                        Interarrival::ParetoType(m) => m.sample(rng),
                    };
                    if clock > t {
                        return Ok(n);
                    }
                    n += 1;
                    if n >= self.renewal_cap {
                        return Err(Error::RenewalCap { cap: self.renewal_cap });
                    }
                }
            }
        }
    }

    pub fn from_spec(spec: &CountingSpec) -> Result<Self> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| invalid(format!("counting kind {:?} needs `{key}`", spec.kind)))
        };
        let model = match spec.kind {
            CountingKindTag::Deterministic => Self::deterministic(),
            CountingKindTag::Poisson => Self::poisson(need(spec.lambda, "lambda")?)?,
            CountingKindTag::MixedPoissonGamma => {
                Self::mixed_poisson_gamma(need(spec.gamma_shape, "gamma_shape")?, need(spec.gamma_rate, "gamma_rate")?)?
            }
            CountingKindTag::Renewal => {
                let inter = spec
                    .renewal_interarrival
                    .as_ref()
                    .ok_or_else(|| invalid("renewal counting needs `renewal_interarrival`"))?;
                let interarrival = match inter {
                    InterarrivalSpec::Exponential { rate, .. } => Interarrival::Exponential { rate: *rate },
                    InterarrivalSpec::ParetoType(d) => Interarrival::ParetoType(d.build()?),
                };
                Self::renewal(interarrival)?
            }
        };
        Ok(model
            .with_averaging(spec.averaging)
            .with_renewal_cap(spec.renewal_cap.unwrap_or(DEFAULT_RENEWAL_CAP)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingKindTag {
    Deterministic,
    #[serde(alias = "homogeneous_poisson")]
    Poisson,
    MixedPoissonGamma,
    Renewal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentialTag {
    Exponential,
}

/// Interarrival law as written in a config: `{"family": "exponential", "rate": 2}`
/// or any claim-size distribution spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InterarrivalSpec {
    Exponential { family: ExponentialTag, rate: f64 },
    ParetoType(DistributionSpec),
}

/// Serialized form of a counting process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingSpec {
    pub kind: CountingKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renewal_interarrival: Option<InterarrivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renewal_cap: Option<u64>,
    #[serde(default)]
    pub averaging: Averaging,
}

impl CountingSpec {
    pub fn poisson(lambda: f64) -> Self {
        Self {
            kind: CountingKindTag::Poisson,
            lambda: Some(lambda),
            gamma_shape: None,
            gamma_rate: None,
            renewal_interarrival: None,
            renewal_cap: None,
            averaging: Averaging::default(),
        }
    }

    pub fn deterministic() -> Self {
        Self {
            kind: CountingKindTag::Deterministic,
            lambda: None,
            ..Self::poisson(1.0)
        }
    }

    pub fn mixed_poisson_gamma(shape: f64, rate: f64) -> Self {
        Self {
            kind: CountingKindTag::MixedPoissonGamma,
            lambda: None,
            gamma_shape: Some(shape),
            gamma_rate: Some(rate),
            ..Self::poisson(1.0)
        }
    }

    pub fn renewal(interarrival: InterarrivalSpec) -> Self {
        Self {
            kind: CountingKindTag::Renewal,
            lambda: None,
            renewal_interarrival: Some(interarrival),
            ..Self::poisson(1.0)
        }
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn build(&self) -> Result<CountingProcessModel> {
        CountingProcessModel::from_spec(self)
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| invalid(format!("poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}
