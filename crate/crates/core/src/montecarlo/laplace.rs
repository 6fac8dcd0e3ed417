use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::limits::{lt_limit, CaseId, LimitLawSpec};
use crate::numerics::NeumaierSum;

/// A rectangular `(r, s)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceGrid {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl Default for LaplaceGrid {
    fn default() -> Self {
        Self {
            r: vec![0.25, 0.5, 1.0, 2.0],
            s: vec![0.0, 0.5, 1.0, 2.0],
        }
    }
}

impl LaplaceGrid {
    /// The 4×4 grid, except for Case 2 whose limit transform is only matched at `s = 0`.
    pub fn default_for(case: CaseId) -> Self {
        match case {
            CaseId::C2 => Self {
                s: vec![0.0],
                ..Self::default()
            },
            _ => Self::default(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().flat_map(move |&r| self.s.iter().map(move |&s| (r, s)))
    }
}

/// Empirical side of a Laplace comparison at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaplace {
    pub r: f64,
    pub s: f64,
    pub empirical: f64,
    pub se: f64,
}

/// Mean of `e^{−ru−sv}` over the pairs, with standard error `sd/√n`, at every grid point.
pub fn empirical_laplace(pairs: &[(f64, f64)], grid: &LaplaceGrid) -> Result<Vec<EmpiricalLaplace>> {
    if pairs.is_empty() {
        return Err(invalid("empirical Laplace transform needs at least one pair"));
    }
    if pairs.iter().any(|&(u, v)| !(u >= 0.0 && v >= 0.0)) {
        return Err(invalid("empirical Laplace transform needs nonnegative pairs"));
    }
    let n = pairs.len() as f64;
    Ok(grid
        .points()
        .map(|(r, s)| {
            let mut sum = NeumaierSum::new();
            let mut sum_sq = NeumaierSum::new();
            for &(u, v) in pairs {
                let e = if r == 0.0 && s == 0.0 { 1.0 } else { (-r * u - s * v).exp() };
                sum.add(e);
                sum_sq.add(e * e);
            }
            let mean = sum.value() / n;
            let var = if pairs.len() > 1 {
                ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            EmpiricalLaplace {
                r,
                s,
                empirical: mean,
                se: (var / n).sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub r: f64,
    pub s: f64,
    pub theoretical: f64,
    pub empirical: f64,
    pub se: f64,
}

/// Theoretical against empirical Laplace transforms on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceComparison {
    pub points: Vec<LaplacePoint>,
    pub max_abs_deviation: f64,
    /// Largest `|emp − theo| / se` over points with a positive standard error.
    pub max_deviation_in_se: f64,
}

impl LaplaceComparison {
    pub fn new(spec: &LimitLawSpec, pairs: &[(f64, f64)], grid: &LaplaceGrid) -> Result<Self> {
        let points = empirical_laplace(pairs, grid)?
            .into_iter()
            .map(|e| {
                Ok(LaplacePoint {
                    r: e.r,
                    s: e.s,
                    theoretical: lt_limit(spec, e.r, e.s)?,
                    empirical: e.empirical,
                    se: e.se,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let max_abs_deviation = points
            .iter()
            .map(|p| (p.empirical - p.theoretical).abs())
            .fold(0.0, f64::max);
        let max_deviation_in_se = points
            .iter()
            .filter(|p| p.se > 0.0)
            .map(|p| (p.empirical - p.theoretical).abs() / p.se)
            .fold(0.0, f64::max);
        Ok(Self {
            points,
            max_abs_deviation,
            max_deviation_in_se,
        })
    }
}
