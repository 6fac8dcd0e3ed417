use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::CountingProcessModel;
use crate::distributions::ClaimLaw;
use crate::error::{invalid, Result};
use crate::numerics::{NeumaierSum, ScaledSumSq};
use crate::rng::substream;

/// One replication: the count `n = N(t)` and the sums `s1 = ΣX`, `s2 = ΣX²`.
///
/// `s2` is kept as `scale² · rel` so ratios stay finite even when the plain
/// sum of squares overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub n: u64,
    pub s1: f64,
    s2_scale: f64,
    s2_rel: f64,
}

impl EnsembleSample {
    pub fn new(n: u64, s1: f64, s2: f64) -> Self {
        Self {
            n,
            s1,
            s2_scale: 1.0,
            s2_rel: s2,
        }
    }

    pub fn from_claims(claims: &[f64]) -> Self {
        let mut s1 = NeumaierSum::new();
        let mut s2 = ScaledSumSq::new();
        for &x in claims {
            s1.add(x);
            s2.add(x);
        }
        Self::from_sums(claims.len() as u64, &s1, &s2)
    }

    fn from_sums(n: u64, s1: &NeumaierSum, s2: &ScaledSumSq) -> Self {
        Self {
            n,
            s1: s1.value(),
            s2_scale: s2.scale(),
            s2_rel: s2.relative(),
        }
    }

    /// `ΣX²`; infinite if it exceeds the floating-point range.
    pub fn s2(&self) -> f64 {
        self.s2_scale * self.s2_scale * self.s2_rel
    }

    /// `s2 / d²` without forming `s2`.
    pub fn s2_over_sq(&self, d: f64) -> f64 {
        let k = self.s2_scale / d;
        self.s2_rel * k * k
    }

    /// `T = s2/s1²`, or `None` when `n = 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.n > 0).then(|| self.s2_over_sq(self.s1))
    }

    /// `C = s2/s1`, or `None` when `n = 0`.
    pub fn c_ratio(&self) -> Option<f64> {
        (self.n > 0).then(|| self.s2_rel * self.s2_scale * (self.s2_scale / self.s1))
    }
}

/// Draws `replications` independent copies of `(N(t), ΣX, ΣX²)`.
///
/// Replication `r` uses substream `r` of `seed`, and results are collected in
/// index order, so the output does not depend on the thread count.
pub fn simulate_ensemble<D: ClaimLaw>(
    claims: &D,
    counting: &CountingProcessModel,
    t: f64,
    replications: u64,
    seed: u64,
) -> Result<Vec<EnsembleSample>> {
    if replications == 0 {
        return Err(invalid("need at least one replication"));
    }
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let n = counting.sample_count(t, &mut rng)?;
            let mut s1 = NeumaierSum::new();
            let mut s2 = ScaledSumSq::new();
            for _ in 0..n {
                let x = claims.sample(&mut rng);
                s1.add(x);
                s2.add(x);
            }
            Ok(EnsembleSample::from_sums(n, &s1, &s2))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ParetoTypeModel;

    #[test]
    fn single_summand_has_unit_ratio() {
        let m = ParetoTypeModel::exact_pareto(1.5, 1.0).unwrap();
        let c = CountingProcessModel::deterministic();
        let xs = simulate_ensemble(&m, &c, 1.0, 1000, 3).unwrap();
        for s in xs {
            assert_eq!(s.n, 1);
            assert!((s.ratio().unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_mean_of_claims() {
        let m = ParetoTypeModel::exact_pareto(5.0, 1.0).unwrap();
        let c = CountingProcessModel::deterministic();
        let xs: Vec<f64> = simulate_ensemble(&m, &c, 5.0, 100_000, 4)
            .unwrap()
            .iter()
            .map(|s| s.s1 / s.n as f64)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - 1.25).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let m = ParetoTypeModel::log_perturbed(0.8, -1.0, 1.0).unwrap();
        let c = CountingProcessModel::mixed_poisson_gamma(2.0, 2.0).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&m, &c, 50.0, 2_000, 9).unwrap())
        };
        let one = run(1);
        let eight = run(8);
        assert!(one.iter().zip(&eight).all(|(a, b)| a.n == b.n
            && a.s1.to_bits() == b.s1.to_bits()
            && a.s2().to_bits() == b.s2().to_bits()));
    }

    #[test]
    fn empty_count_gives_zero_sums() {
        let m = ParetoTypeModel::exact_pareto(2.0, 1.0).unwrap();
        let c = CountingProcessModel::poisson(0.01).unwrap();
        let xs = simulate_ensemble(&m, &c, 1.0, 500, 1).unwrap();
        let empty: Vec<_> = xs.iter().filter(|s| s.n == 0).collect();
        assert!(!empty.is_empty());
        for s in empty {
            assert_eq!((s.s1, s.s2()), (0.0, 0.0));
            assert!(s.ratio().is_none());
        }
    }

    #[test]
    fn ratio_survives_overflowing_squares() {
        let s = EnsembleSample::from_claims(&[1e200, 1e200, 1.0]);
        assert!(s.s2().is_infinite());
        assert!((s.ratio().unwrap() - 0.5).abs() < 1e-15);
        assert!((s.c_ratio().unwrap() - 1e200).abs() / 1e200 < 1e-15);
    }

    #[test]
    fn zero_replications_rejected() {
        let m = ParetoTypeModel::exact_pareto(2.0, 1.0).unwrap();
        assert!(simulate_ensemble(&m, &CountingProcessModel::deterministic(), 1.0, 0, 0).is_err());
    }
}
