//! Simulation and numerical verification of limit laws for
//! `T = ΣX²/(ΣX)²` over random sums of Pareto-type claims, together with
//! the sample coefficient of variation and sample dispersion built from it.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: claim-size laws with regularly varying tails.
//! * [`counting`]: counting processes `N(t)` and their mixing laws `Λ`.
//! * [`normalizers`]: the deterministic scaling sequences of each regime.
//! * [`limits`]: limiting Laplace transforms, stable sampling, delta-method constants.
//! * [`montecarlo`]: ensembles, statistics, empirical transforms and distances.
//! * [`config`], [`experiment`] and [`verify`]: configuration, pipelines and the acceptance suite.

pub mod config;
pub mod counting;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod limits;
pub mod montecarlo;
pub mod normalizers;
pub mod numerics;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
