//! Numerical building blocks shared by the model and limit-law modules.

mod gamma;
mod quadrature;
mod roots;
mod summation;

pub use gamma::gamma;
pub use quadrature::{integrate, integrate_to_infinity, QuadOptions, QuadResult};
pub use roots::{bisect, bracket_upward};
pub use summation::{NeumaierSum, ScaledSumSq};
