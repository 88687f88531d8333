use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_derivative, edge_to_node, gradient, l2_norm, DiscreteField};
use crate::scalar::Real;

/// `(⨍_{B(x₀,r)} |∇u|²)^{1/2}` for a list of radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GradientProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

/// Ball averages of the node-averaged gradient magnitude. Balls must lie inside the
/// box and radii must not go below `epsilon`.
pub fn gradient_profile<T: Real>(
    u: &DiscreteField<T>,
    center: &[f64],
    radii: &[f64],
    epsilon: f64,
) -> Result<GradientProfile> {
    let g = u.grid();
    let d = g.dim();
    if center.len() != d {
        return Err(Error::RankMismatch { expected: d, found: center.len() });
    }
    let lo = g.origin().as_f64();
    let hi = lo + g.side().as_f64();
    for &r in radii {
        if !(r >= epsilon) || !(r > 0.0) {
            return Err(Error::arg(format!("radius {r} below the scale floor {epsilon}")));
        }
        if !g.is_periodic() && center.iter().any(|&c| c - r < lo - 1e-12 || c + r > hi + 1e-12) {
            return Err(Error::arg(format!("ball of radius {r} leaves the domain")));
        }
    }
    let grad = edge_to_node(&gradient(u)?)?;
    let mag = grad.pointwise_magnitude();
    let side = g.side().as_f64();
    let values = radii
        .iter()
        .map(|&r| {
            let (mut num, mut den) = (0.0, 0.0);
            for idx in 0..g.num_nodes() {
                let x = g.position(idx);
                let dist2: f64 = (0..d)
                    .map(|k| {
                        let mut dx = x[k].as_f64() - center[k];
                        if g.is_periodic() {
                            dx -= side * (dx / side).round();
                        }
                        dx * dx
                    })
                    .sum();
                if dist2 <= r * r {
                    let w = g.node_weight(idx).as_f64();
                    num += w * mag[idx].as_f64().powi(2);
                    den += w;
                }
            }
            if den > 0.0 {
                Ok((num / den).sqrt())
            } else {
                Err(Error::arg(format!("ball of radius {r} contains no nodes")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(GradientProfile { center: center.to_vec(), radii: radii.to_vec(), values, epsilon })
}

/// Discrete `‖u‖_{H²}` from centered first and second differences.
pub fn h2_norm<T: Real>(u: &DiscreteField<T>) -> Result<T> {
    let d = u.grid().dim();
    let mut acc = l2_norm(u).powi(2);
    for i in 0..d {
        let di = centered_derivative(u, i)?;
        acc = acc + l2_norm(&di).powi(2);
        for j in 0..d {
            acc = acc + l2_norm(&centered_derivative(&di, j)?).powi(2);
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{solve_dirichlet, CoefficientSource, DirichletProblem, ScalarFunction};
    use crate::grid::Grid;
    use crate::solver::SolveOptions;
    use crate::tensor::Tensor;

    #[test]
    fn affine_profile_is_flat() {
        let g = Grid::<f64>::unit_dirichlet(2, 64).unwrap();
        let u = DiscreteField::from_fn(&g, |x| 3.0 * x[0] - 4.0 * x[1]);
        let p = gradient_profile(&u, &[0.5, 0.5], &[0.1, 0.2, 0.4], 0.05).unwrap();
        for v in p.values {
            assert!((v - 5.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn rejects_balls_outside() {
        let g = Grid::<f64>::unit_dirichlet(1, 32).unwrap();
        let u = DiscreteField::from_fn(&g, |x| x[0]);
        assert!(gradient_profile(&u, &[0.5], &[0.6], 0.0).is_err());
        assert!(gradient_profile(&u, &[0.5], &[0.1], 0.2).is_err());
    }

    #[test]
    fn h2_norm_of_quadratic() {
        let g = Grid::<f64>::periodic(1, 256, 1.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| (std::f64::consts::TAU * x[0]).sin());
        let w = std::f64::consts::TAU;
        let exact = (0.5 * (1.0 + w * w + w.powi(4))).sqrt();
        assert!((h2_norm(&u).unwrap() / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn caccioppoli_for_harmonic_solutions() {
        // ⨍_{B(x,r)}|∇u|² ≤ C r⁻² ⨍_{B(x,2r)}|u − ū|², checked with the oscillation bound
        let ratios: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&n| {
                let p = DirichletProblem {
                    dim: 2,
                    n,
                    epsilon: 0.0,
                    body: ScalarFunction::Constant { value: 0.0 },
                    boundary: ScalarFunction::Affine { gradient: vec![1.0, 0.0], offset: 0.0 },
                    lower: -1.0,
                    side: 2.0,
                };
                let a = Tensor::<f64>::identity(2);
                let (u, _) =
                    solve_dirichlet(&p, CoefficientSource::Effective(&a, 1), &SolveOptions::default()).unwrap();
                let r = 0.25;
                let grad = gradient_profile(&u, &[0.0, 0.0], &[r], 0.0).unwrap().values[0];
                let g = u.grid();
                let inside: Vec<f64> = (0..g.num_nodes())
                    .filter(|&i| g.position(i)[..2].iter().map(|v| v * v).sum::<f64>() <= 4.0 * r * r)
                    .map(|i| u.data()[i])
                    .collect();
                let mean = inside.iter().sum::<f64>() / inside.len() as f64;
                let osc = (inside.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / inside.len() as f64).sqrt();
                grad / (osc / r)
            })
            .collect();
        assert!(ratios.iter().all(|&c| c < 4.0));
        assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.05);
    }
}
