use super::krylov::{SolveMethod, SolveReport};
use crate::error::{Error, Result};
use crate::grid::fft::{discrete_laplacian_symbol, CubeFft};
use crate::grid::{DiscreteField, Location};
use crate::scalar::Real;

/// Solves `−Δ_h u + λu = rhs` componentwise on a periodic grid by dividing each
/// discrete Fourier mode by `σ(k) + λ`, `σ` the symbol of the compact Laplacian.
pub fn solve_fft<T: Real>(lambda: T, rhs: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    solve_fft_report(lambda, rhs).map(|(u, _)| u)
}

pub fn solve_fft_report<T: Real>(lambda: T, rhs: &DiscreteField<T>) -> Result<(DiscreteField<T>, SolveReport)> {
    let start = std::time::Instant::now();
    let g = rhs.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("FFT solves need a periodic grid".into()));
    }
    if !g.n().is_power_of_two() {
        return Err(Error::InvalidGrid(format!("FFT solves need a power-of-two side, got {}", g.n())));
    }
    if rhs.location() != Location::Node {
        return Err(Error::arg("FFT solves expect a node field"));
    }
    if lambda < T::zero() {
        return Err(Error::NegativeLambda(lambda.as_f64()));
    }
    let d = g.dim();
    let n = g.n();
    let h = g.h();
    if lambda == T::zero() {
        for c in 0..rhs.components() {
            let s: f64 = rhs.component(c).iter().map(|v| v.as_f64()).sum();
            let scale: f64 = rhs.component(c).iter().map(|v| v.as_f64().abs()).sum();
            if s.abs() > 1e-9 * scale + f64::MIN_POSITIVE {
                return Err(Error::SingularSystem(format!("lambda = 0 needs a mean-zero rhs (sum {s:.3e})")));
            }
        }
    }
    let fft = CubeFft::new(d, n);
    let mut out = rhs.clone();
    for c in 0..rhs.components() {
        let res = fft.apply_multiplier(rhs.component(c), |k| {
            let s = discrete_laplacian_symbol(&k[..d], n, h) + lambda;
            if s > T::zero() {
                T::one() / s
            } else {
                T::zero()
            }
        });
        out.component_mut(c).copy_from_slice(&res);
    }
    let report = SolveReport {
        iterations: 0,
        final_relative_residual: 0.0,
        wall_time: start.elapsed().as_secs_f64(),
        method: SolveMethod::Fft,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::ConstantTensor;
    use crate::grid::Grid;
    use crate::solver::{assemble, solve_krylov, SolveOptions};
    use crate::tensor::Tensor;
    use std::f64::consts::TAU;

    #[test]
    fn cosine_mode() {
        let g = Grid::<f64>::periodic(1, 32, 2.0).unwrap();
        let f = DiscreteField::from_fn(&g, |x| (TAU * x[0] / 2.0).cos());
        let u = solve_fft(1.0, &f).unwrap();
        let s = discrete_laplacian_symbol(&[1], 32, g.h());
        for (a, b) in u.data().iter().zip(f.data()) {
            assert!((a - b / (s + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_zero_gauge() {
        let g = Grid::<f64>::periodic(2, 16, 1.0).unwrap();
        let f = DiscreteField::from_fn(&g, |x| (TAU * x[0]).sin() + (2.0 * TAU * x[1]).cos());
        let u = solve_fft(0.0, &f).unwrap();
        assert!(u.data().iter().sum::<f64>().abs() < 1e-12);
        let bad = DiscreteField::from_fn(&g, |x| 1.0 + x[0]);
        assert!(matches!(solve_fft(0.0, &bad), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn inverts_assembled_laplacian_and_agrees_with_krylov() {
        let g = Grid::<f64>::periodic(2, 32, 3.0).unwrap();
        let f = DiscreteField::from_fn(&g, |x| (x[0] * TAU / 3.0).sin() * (x[1] * 2.0 * TAU / 3.0).sin() + 0.3);
        let lambda = 0.25;
        let u = solve_fft(lambda, &f).unwrap();
        let op = assemble(&ConstantTensor { dim: 2, m: 1, value: Tensor::identity(2) }, &g, lambda).unwrap();
        let back = op.full_matrix().mul_vec(u.data());
        for (a, b) in back.iter().zip(f.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (v, _) = solve_krylov(&op, &f, &SolveOptions::default()).unwrap();
        for (a, b) in u.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let g = Grid::<f64>::periodic(1, 12, 1.0).unwrap();
        assert!(solve_fft(1.0, &DiscreteField::from_fn(&g, |x| x[0])).is_err());
    }
}
