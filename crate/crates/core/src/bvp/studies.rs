use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    gradient_profile, h2_norm, solve_dirichlet, CoefficientSource, DirichletProblem, ScalarFunction, CELLS_PER_EPSILON,
};
use crate::coeff::{CoefficientField, TensorField};
use crate::corrector::{effective_tensor, solve_corrector, solve_corrector_on, GridRule, ThetaOptions};
use crate::ergodic::{theta_bound, ThetaSpec};
use crate::error::{Error, Result};
use crate::grid::{l2_norm, DiscreteField};
use crate::report::{ExperimentReport, Series};
use crate::scalar::Real;
use crate::solver::SolveOptions;

/// Settings for [`rate_study`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RateOptions {
    /// Scale of the ψ-proxy and of `Â`; defaults to `2/ε_min`.
    pub t_max: Option<f64>,
    pub rule: GridRule,
    pub solve: SolveOptions,
    /// Assemble the right-hand side `‖∇χ_T − ψ‖ + ‖∇χ*_T − ψ*‖ + T⁻¹Θ`.
    pub rhs: bool,
    pub theta: Option<ThetaOptions>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { t_max: None, rule: GridRule::default(), solve: SolveOptions::default(), rhs: true, theta: None }
    }
}

/// Cells per side resolving `ε` (a power of two so that grids nest).
pub fn cells_for(side: f64, epsilon: f64) -> usize {
    ((CELLS_PER_EPSILON * side / epsilon).ceil() as usize).max(4).next_power_of_two()
}

fn b2_distance<T: Real>(a: &DiscreteField<T>, b: &DiscreteField<T>) -> Result<f64> {
    Ok(l2_norm(&a.sub(b)?).as_f64() / a.grid().volume().as_f64().sqrt())
}

/// `‖∇χ_T − ψ‖_{B²}` with `ψ := ∇χ_{T_max}` on the box, for each `T`.
fn proxy_distances<T: Real>(
    field: &CoefficientField<T>,
    ts: &[f64],
    t_max: f64,
    rule: &GridRule,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let grid = rule.grid_for(field, t_max)?;
    let psi = solve_corrector_on(field, t_max, &grid, rule.policy, opts)?.grad_chi();
    ts.iter().map(|&t| b2_distance(&solve_corrector_on(field, t, &grid, rule.policy, opts)?.grad_chi(), &psi)).collect()
}

/// `‖u_ε − u_0‖_{L²}/‖u_0‖_{H²}` against `ε`. `Â_{T_max}` is computed once; `u_0` is
/// solved with it on every grid, and `‖u_0‖_{H²}` is taken on the finest.
pub fn rate_study<T: Real>(
    field: &CoefficientField<T>,
    eps_list: &[f64],
    template: &DirichletProblem,
    opts: &RateOptions,
) -> Result<ExperimentReport> {
    if eps_list.len() < 2 || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::arg("need at least two epsilons in (0, 1)"));
    }
    let eps_min = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = opts.t_max.unwrap_or(2.0 / eps_min);
    let mut rep = ExperimentReport::new("rate");
    rep.field_hash = Some(field.content_hash());
    rep.config = serde_json::json!({ "epsilons": eps_list, "problem": template, "options": opts });

    let start = Instant::now();
    let a_hat = effective_tensor(&solve_corrector(field, t_max, &opts.rule, &opts.solve)?)?;
    rep.time("effective", start.elapsed().as_secs_f64());
    let n_fine = cells_for(template.side, eps_min);
    let start = Instant::now();
    let (u0, _) = solve_dirichlet(
        &template.with(n_fine, 0.0),
        CoefficientSource::Effective(&a_hat.values, field.m()),
        &opts.solve,
    )?;
    rep.time("homogenized", start.elapsed().as_secs_f64());
    let h2 = h2_norm(&u0)?.as_f64();
    rep.values.insert("u0H2".into(), h2);
    rep.values.insert("Tmax".into(), t_max);
    for (i, v) in a_hat.values.to_f64().as_slice().iter().enumerate() {
        rep.values.insert(format!("aHat{i}"), *v);
    }

    let mut err = Series::new("l2err", "eps", "|u_eps - u_0|_L2 / |u_0|_H2");
    let mut iters = Series::new("iterations", "eps", "Krylov iterations");
    for &eps in eps_list {
        let start = Instant::now();
        let p = template.with(cells_for(template.side, eps), eps);
        let (ue, r) = solve_dirichlet(&p, CoefficientSource::Field(field), &opts.solve)?;
        // same grid for both, so discretization error of L_0 cancels
        let u0c = if p.n == n_fine {
            u0.clone()
        } else {
            solve_dirichlet(&p.with(p.n, 0.0), CoefficientSource::Effective(&a_hat.values, field.m()), &opts.solve)?.0
        };
        err.push(eps, l2_norm(&ue.sub(&u0c)?).as_f64() / h2);
        iters.push(eps, r.iterations as f64);
        rep.time(&format!("solve eps={eps}"), start.elapsed().as_secs_f64());
    }
    let lhs = err.ys();
    rep.series.extend([err, iters]);
    if rep.fit("l2err").is_none() {
        rep.notes.push("error series is degenerate; slope not fitted".into());
    }

    if opts.rhs {
        let start = Instant::now();
        let ts: Vec<f64> = eps_list.iter().map(|e| 1.0 / e).collect();
        let direct = proxy_distances(field, &ts, t_max, &opts.rule, &opts.solve)?;
        let adjoint = if field.is_symmetric() {
            direct.clone()
        } else {
            proxy_distances(&field.adjoint(), &ts, t_max, &opts.rule, &opts.solve)?
        };
        let thetas: Option<Vec<f64>> = match &opts.theta {
            Some(th) => {
                let top = ts.iter().cloned().fold(0.0, f64::max);
                let spec = ThetaSpec::from_field(field, th.k, th.sigma, th.c, top, th.q_bar, &th.plan)?;
                Some(ts.iter().map(|&t| theta_bound(&ThetaSpec { t_max: t, ..spec.clone() })).collect::<Result<_>>()?)
            }
            None => None,
        };
        let mut rhs = Series::new("rhsBound", "eps", "|grad chi_T - psi| + |grad chi*_T - psi*| + Theta(T)/T");
        for (i, &eps) in eps_list.iter().enumerate() {
            let theta_term = thetas.as_ref().map_or(0.0, |t| t[i] * eps);
            rhs.push(eps, direct[i] + adjoint[i] + theta_term);
        }
        if thetas.is_none() {
            rep.notes.push("Theta term omitted from the right-hand side".into());
        }
        rep.notes.push("psi-proxy: grad chi at T_max replaces the T -> infinity limit".into());
        let ratios: Vec<f64> = lhs.iter().zip(rhs.ys()).filter(|(_, r)| *r > 0.0).map(|(l, r)| l / r).collect();
        if !ratios.is_empty() {
            rep.constants.insert("C".into(), ratios.iter().cloned().fold(0.0, f64::max));
        }
        rep.series.push(rhs);
        rep.fit("rhsBound");
        rep.time("rhs", start.elapsed().as_secs_f64());
    }
    Ok(rep)
}

/// Solves `−div(A∇u) = 0` on `[−R, R]^d` with boundary data `x₁|x|^{σ−1}` for each `R`
/// and records `(⨍_{B(0,r)}|∇u|²)^{1/2}` at a fixed `r`.
pub fn liouville_probe<T: Real>(
    coeff: CoefficientSource<'_, T>,
    dim: usize,
    sigma: f64,
    radii: &[f64],
    r: f64,
    cells_per_unit: usize,
    opts: &SolveOptions,
) -> Result<ExperimentReport> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::arg(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if radii.len() < 2 || radii.iter().any(|&big| !(big >= 2.0 * r)) {
        return Err(Error::arg("need at least two outer radii, each at least 2r"));
    }
    let mut rep = ExperimentReport::new("liouville");
    rep.config = serde_json::json!({ "dim": dim, "sigma": sigma, "R": radii, "r": r, "cellsPerUnit": cells_per_unit });
    if let CoefficientSource::Field(f) = coeff {
        rep.field_hash = Some(f.content_hash());
        if f.dim() != dim {
            return Err(Error::RankMismatch { expected: dim, found: f.dim() });
        }
    }
    let mut series = Series::new("interiorGradient", "R", "(avg_B(0,r) |grad u|^2)^1/2");
    for &big in radii {
        let start = Instant::now();
        let p = DirichletProblem {
            dim,
            n: (2.0 * big * cells_per_unit as f64).round() as usize,
            epsilon: 1.0,
            body: ScalarFunction::Constant { value: 0.0 },
            boundary: ScalarFunction::Growth { sigma, scale: 1.0 },
            lower: -big,
            side: 2.0 * big,
        };
        let (u, _) = solve_dirichlet(&p, coeff, opts)?;
        let prof = gradient_profile(&u, &vec![0.0; dim], &[r], 0.0)?;
        series.push(big, prof.values[0]);
        rep.time(&format!("solve R={big}"), start.elapsed().as_secs_f64());
    }
    let ys = series.ys();
    let increase = ys.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.values.insert("maxIncrease".into(), increase);
    rep.series.push(series);
    rep.fit("interiorGradient");
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn constant_field_rate_is_degenerate() {
        let f = CoefficientField::constant(1, 1, Tensor::identity(1), 1.0).unwrap();
        let template = DirichletProblem {
            dim: 1,
            n: 0,
            epsilon: 0.0,
            body: ScalarFunction::SinProduct { amplitude: PI * PI, modes: vec![1.0] },
            boundary: ScalarFunction::Constant { value: 0.0 },
            lower: 0.0,
            side: 1.0,
        };
        let rep = rate_study(&f, &[0.25, 0.125, 0.0625], &template, &RateOptions::default()).unwrap();
        assert!(rep.series("l2err").unwrap().ys().iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn periodic_one_dimensional_rate() {
        let f =
            CoefficientField::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0])).unwrap();
        let template = DirichletProblem {
            dim: 1,
            n: 0,
            epsilon: 0.0,
            body: ScalarFunction::SinProduct { amplitude: PI * PI, modes: vec![1.0] },
            boundary: ScalarFunction::Constant { value: 0.0 },
            lower: 0.0,
            side: 1.0,
        };
        let rep = rate_study(&f, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], &template, &RateOptions::default())
            .unwrap();
        let fit = rep.fits["l2err"].clone().unwrap();
        assert!(fit.slope >= 0.9, "{fit:?}");
    }

    #[test]
    fn liouville_identity_decays() {
        let a = Tensor::<f64>::identity(2);
        let rep = liouville_probe(
            CoefficientSource::Effective(&a, 1),
            2,
            0.5,
            &[2.0, 4.0, 8.0],
            0.5,
            8,
            &SolveOptions::default(),
        )
        .unwrap();
        let fit = rep.fits["interiorGradient"].clone().unwrap();
        assert!(fit.slope <= -0.3, "{fit:?}");
        assert!(rep.values["maxIncrease"] < 0.0);
        assert!(liouville_probe(
            CoefficientSource::Effective(&a, 1),
            2,
            1.0,
            &[2.0, 4.0],
            0.5,
            8,
            &SolveOptions::default()
        )
        .is_err());
    }

    #[test]
    fn constant_data_gives_flat_interior() {
        let a = Tensor::<f64>::identity(1);
        let p = DirichletProblem {
            dim: 1,
            n: 32,
            epsilon: 0.0,
            body: ScalarFunction::Constant { value: 0.0 },
            boundary: ScalarFunction::Constant { value: 2.0 },
            lower: -2.0,
            side: 4.0,
        };
        let (u, _) = solve_dirichlet(&p, CoefficientSource::Effective(&a, 1), &SolveOptions::default()).unwrap();
        let prof = gradient_profile(&u, &[0.0], &[0.5], 0.0).unwrap();
        assert!(prof.values[0] < 1e-9);
    }
}
