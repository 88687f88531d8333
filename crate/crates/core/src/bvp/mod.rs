//! Dirichlet problems for `L_ε` and `L_0` on a box, rate studies and large-scale
//! gradient profiles.

mod profile;
mod studies;

use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientField, ConstantTensor, Rescaled};
use crate::error::{Error, Result};
use crate::grid::{Boundary, DiscreteField, Grid};
use crate::scalar::Real;
use crate::solver::{assemble, solve_vector, SolveOptions, SolveReport, SparseOperator};
use crate::tensor::Tensor;

pub use profile::{gradient_profile, h2_norm, GradientProfile};
pub use studies::{cells_for, liouville_probe, rate_study, RateOptions};

/// Closed-form scalar functions for body forces and boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ScalarFunction {
    Constant {
        value: f64,
    },
    Affine {
        gradient: Vec<f64>,
        offset: f64,
    },
    /// `amplitude · Π_i sin(k_i π x_i)`
    SinProduct {
        amplitude: f64,
        modes: Vec<f64>,
    },
    /// `scale · x_1 |x|^{σ−1}`, growing like `|x|^σ`.
    Growth {
        sigma: f64,
        scale: f64,
    },
}

impl ScalarFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarFunction::Constant { value } => *value,
            ScalarFunction::Affine { gradient, offset } => {
                offset + gradient.iter().zip(x).map(|(g, v)| g * v).sum::<f64>()
            }
            ScalarFunction::SinProduct { amplitude, modes } => {
                amplitude * modes.iter().zip(x).map(|(k, v)| (k * std::f64::consts::PI * v).sin()).product::<f64>()
            }
            ScalarFunction::Growth { sigma, scale } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    scale * x[0] * r.powf(sigma - 1.0)
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        let vals: Vec<f64> = match self {
            ScalarFunction::Constant { value } => vec![*value],
            ScalarFunction::Affine { gradient, offset } => gradient.iter().chain([offset]).copied().collect(),
            ScalarFunction::SinProduct { amplitude, modes } => modes.iter().chain([amplitude]).copied().collect(),
            ScalarFunction::Growth { sigma, scale } => vec![*sigma, *scale],
        };
        vals.iter().all(|v| v.is_finite())
    }
}

/// `−div(A(x/ε)∇u) = F` in the box, `u = f` on its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DirichletProblem {
    pub dim: usize,
    /// Cells per side.
    pub n: usize,
    /// Zero for a homogenized (constant-coefficient) solve.
    #[serde(default)]
    pub epsilon: f64,
    pub body: ScalarFunction,
    pub boundary: ScalarFunction,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "unit")]
    pub side: f64,
}

fn unit() -> f64 {
    1.0
}

/// Coefficients of a Dirichlet solve.
#[derive(Clone, Copy, Debug)]
pub enum CoefficientSource<'a, T: Real> {
    /// `A(x/ε)` with `ε` from the problem.
    Field(&'a CoefficientField<T>),
    /// A constant (homogenized) tensor with `m` components.
    Effective(&'a Tensor<T>, usize),
}

/// Grid spacing must satisfy `h ≤ ε/16` for oscillatory solves.
pub const CELLS_PER_EPSILON: f64 = 16.0;

impl DirichletProblem {
    pub fn grid<T: Real>(&self) -> Result<Grid<T>> {
        Grid::with_origin(self.dim, self.n, T::lit(self.side), T::lit(self.lower), Boundary::Dirichlet)
    }

    /// Same problem on `n` cells with scale `epsilon`.
    pub fn with(&self, n: usize, epsilon: f64) -> Self {
        Self { n, epsilon, ..self.clone() }
    }
}

pub(crate) fn operator<T: Real>(
    problem: &DirichletProblem,
    coeff: CoefficientSource<'_, T>,
    grid: &Grid<T>,
) -> Result<SparseOperator<T>> {
    match coeff {
        CoefficientSource::Field(field) => {
            if !(problem.epsilon > 0.0) {
                return Err(Error::arg("an oscillatory solve needs epsilon > 0"));
            }
            let h = grid.h().as_f64();
            let required = problem.epsilon / CELLS_PER_EPSILON;
            if h > required * (1.0 + 1e-12) {
                return Err(Error::UnderResolved { h, required });
            }
            assemble(&Rescaled::new(field, problem.epsilon), grid, T::zero())
        }
        CoefficientSource::Effective(a, m) => {
            if a.side() != problem.dim * m {
                return Err(Error::RankMismatch { expected: problem.dim * m, found: a.side() });
            }
            assemble(&ConstantTensor { dim: problem.dim, m, value: a.clone() }, grid, T::zero())
        }
    }
}

fn components<T: Real>(coeff: &CoefficientSource<'_, T>) -> usize {
    match coeff {
        CoefficientSource::Field(f) => f.m(),
        CoefficientSource::Effective(_, m) => *m,
    }
}

/// Solves the discrete Dirichlet problem; boundary data is lifted into the rhs.
pub fn solve_dirichlet<T: Real>(
    problem: &DirichletProblem,
    coeff: CoefficientSource<'_, T>,
    opts: &SolveOptions,
) -> Result<(DiscreteField<T>, SolveReport)> {
    if !problem.body.is_finite() || !problem.boundary.is_finite() {
        return Err(Error::arg("body force and boundary data must be finite"));
    }
    let grid = problem.grid::<T>()?;
    let m = components(&coeff);
    let op = operator(problem, coeff, &grid)?;
    let n = grid.num_nodes();
    let d = grid.dim();
    let mut lift = DiscreteField::zeros(&grid, m, crate::grid::Location::Node);
    let mut body = lift.clone();
    for idx in 0..n {
        let x: Vec<f64> = grid.position(idx)[..d].iter().map(|v| v.as_f64()).collect();
        let f = T::lit(problem.body.eval(&x));
        let g = if grid.is_boundary_node(idx) { T::lit(problem.boundary.eval(&x)) } else { T::zero() };
        for a in 0..m {
            body.component_mut(a)[idx] = f;
            lift.component_mut(a)[idx] = g;
        }
    }
    let mut kg = vec![T::zero(); m * n];
    op.full_matrix().matvec(lift.data(), &mut kg);
    let rhs = body.zip_with(&lift.with_data(kg), |f, k| f - k)?;
    let b = op.gather(&rhs);
    let (x, report) = solve_vector(&op, &b, None, opts)?;
    let u = op.scatter(&x).add(&lift)?;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l2_norm;
    use std::f64::consts::{PI, TAU};

    fn problem(dim: usize, n: usize, body: ScalarFunction, boundary: ScalarFunction) -> DirichletProblem {
        DirichletProblem { dim, n, epsilon: 0.0, body, boundary, lower: 0.0, side: 1.0 }
    }

    #[test]
    fn affine_reproduction() {
        let g = ScalarFunction::Affine { gradient: vec![0.7, -1.3], offset: 0.2 };
        let p = problem(2, 16, ScalarFunction::Constant { value: 0.0 }, g.clone());
        let a = Tensor::from_vec(2, vec![1.5, 0.3, 0.3, 0.8]);
        let (u, _) = solve_dirichlet(&p, CoefficientSource::Effective(&a, 1), &SolveOptions::default()).unwrap();
        let grid = u.grid().clone();
        for idx in 0..grid.num_nodes() {
            let x = grid.position(idx);
            assert!((u.data()[idx] - g.eval(&x[..2])).abs() < 1e-9);
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        let err = |n: usize| {
            let p = problem(
                2,
                n,
                ScalarFunction::SinProduct { amplitude: 2.0 * PI * PI, modes: vec![1.0, 1.0] },
                ScalarFunction::Constant { value: 0.0 },
            );
            let a = Tensor::<f64>::identity(2);
            let (u, _) = solve_dirichlet(&p, CoefficientSource::Effective(&a, 1), &SolveOptions::default()).unwrap();
            let exact = DiscreteField::from_fn(u.grid(), |x| (PI * x[0]).sin() * (PI * x[1]).sin());
            l2_norm(&u.sub(&exact).unwrap())
        };
        let order = (err(16) / err(32)).log2();
        assert!(order > 1.9, "{order}");
    }

    #[test]
    fn oscillatory_energy_is_stable() {
        let field =
            CoefficientField::scalar_isotropic(2, 2.0, &[(vec![TAU, 0.0], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0, 1.0]))
                .unwrap();
        let energy = |eps: f64| {
            let p = DirichletProblem {
                epsilon: eps,
                ..problem(
                    2,
                    (CELLS_PER_EPSILON / eps) as usize,
                    ScalarFunction::Constant { value: 1.0 },
                    ScalarFunction::Constant { value: 0.0 },
                )
            };
            let (u, _) = solve_dirichlet(&p, CoefficientSource::Field(&field), &SolveOptions::default()).unwrap();
            l2_norm(&crate::grid::gradient(&u).unwrap())
        };
        let (a, b) = (energy(0.25), energy(0.125));
        assert!(a < 3.0 * 0.5 && b < 3.0 * 0.5);
        assert!((a / b - 1.0).abs() < 0.2);
    }

    #[test]
    fn resolution_rule() {
        let field = CoefficientField::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, None).unwrap();
        let p = DirichletProblem {
            epsilon: 0.1,
            ..problem(1, 64, ScalarFunction::Constant { value: 1.0 }, ScalarFunction::Constant { value: 0.0 })
        };
        assert!(matches!(
            solve_dirichlet(&p, CoefficientSource::Field(&field), &SolveOptions::default()),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn growth_function_scales() {
        let f = ScalarFunction::Growth { sigma: 0.5, scale: 1.0 };
        assert!((f.eval(&[4.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((f.eval(&[-16.0]) + 4.0).abs() < 1e-15);
    }
}
