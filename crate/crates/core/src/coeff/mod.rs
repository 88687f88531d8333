//! Coefficient fields and their quantitative almost-periodicity moduli.

mod difference;
mod field;
mod moduli;
mod sampling;

pub use difference::{difference, difference_scalar, field_difference, grid_difference, DifferenceSpec};
pub use field::{CoefficientField, ConstantTensor, EllipticityCertificate, Rescaled, TensorField, TrigMode};
pub use moduli::{field_mean, mean_value, omega, rho, rho_exponent, s_norm};
pub use sampling::{kronecker, SamplingPlan};
