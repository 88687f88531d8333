//! Numerical toolkit for homogenization of divergence-form elliptic systems with
//! almost-periodic coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bvp;
pub mod coeff;
pub mod corrector;
pub mod ergodic;
pub mod error;
pub mod grid;
pub mod report;
pub mod scalar;
pub mod solver;
pub mod tensor;
pub mod twoscale;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid64 = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type Field64 = grid::DiscreteField<f64>;
pub type Field32 = grid::DiscreteField<f32>;
pub type Coefficients64 = coeff::CoefficientField<f64>;
pub type Coefficients32 = coeff::CoefficientField<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
