//! Monte Carlo ensembles of random sums and the comparisons built on them.

mod delta;
mod distance;
mod ensemble;
mod laplace;
mod statistics;
pub mod summary;

pub use delta::{case6_delta_check, delta_check_row, DeltaCheckReport, DeltaCheckRow};
pub use distance::{kolmogorov_survival, ks_distance, ks_two_sample, ks_two_sample_p_value, tail_slope};
pub use ensemble::{simulate_ensemble, EnsembleSample};
pub use laplace::{empirical_laplace, EmpiricalLaplace, LaplaceComparison, LaplaceGrid, LaplacePoint};
pub use statistics::{laplace_pair, risk_statistics, statistic, RiskStatistics, StatisticSeries, Targets};
