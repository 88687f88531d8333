use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{build_expansion, measure_delta, ExpansionInput};
use crate::bvp::{cells_for, solve_dirichlet, CoefficientSource, DirichletProblem};
use crate::coeff::CoefficientField;
use crate::corrector::{effective_tensor, flux_and_dual, solve_corrector_on, GridRule};
use crate::error::{Error, Result};
use crate::grid::{write_apf, Grid};
use crate::report::{ExperimentReport, Series};
use crate::scalar::Real;
use crate::solver::SolveOptions;

/// Settings for [`h1_error_study`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
#[derive(Default)]
pub struct TwoScaleOptions {
    /// Scale of `Â` and of the ψ-proxy; defaults to `2/ε_min`.
    pub t_max: Option<f64>,
    pub rule: GridRule,
    pub solve: SolveOptions,
    /// Writes `w_eps_<i>.apf` per epsilon when set.
    #[serde(skip)]
    pub dump_dir: Option<PathBuf>,
}

/// Periodic cell grid whose spacing times `ε` divides the domain spacing.
fn cell_grid<T: Real>(field: &CoefficientField<T>, rule: &GridRule, t: f64, y_spacing: f64) -> Result<Grid<T>> {
    let base = rule.grid_for(field, t)?;
    let side = base.side().as_f64();
    let r = (y_spacing / base.h().as_f64()).ceil().max(1.0);
    let n = side * r / y_spacing;
    if (n - n.round()).abs() > 1e-9 * n {
        return Err(Error::Incommensurate(format!(
            "corrector box {side} is not a multiple of the cell spacing {y_spacing}"
        )));
    }
    Grid::periodic(field.dim(), n.round() as usize, base.side())
}

/// `‖w_ε‖_{H¹}` against the measured collar width `δ`, one point per `ε` with `T = 1/ε`.
pub fn h1_error_study<T: Real>(
    field: &CoefficientField<T>,
    eps_list: &[f64],
    template: &DirichletProblem,
    opts: &TwoScaleOptions,
) -> Result<ExperimentReport> {
    if eps_list.len() < 2 || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::arg("need at least two epsilons in (0, 1)"));
    }
    let eps_min = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = opts.t_max.unwrap_or(2.0 / eps_min);
    let mut rep = ExperimentReport::new("twoscale");
    rep.field_hash = Some(field.content_hash());
    rep.config = serde_json::json!({ "epsilons": eps_list, "problem": template, "options": opts });

    let mut h1 = Series::new("h1err", "delta", "|w_eps|_H1");
    let mut by_eps = Series::new("h1errEps", "eps", "|w_eps|_H1");
    let mut deltas = Series::new("delta", "eps", "measured delta");
    let mut dual = Series::new("dualNorm", "eps", "|L_eps w_eps|_H-1");
    let mut collar = Series::new("collar", "eps", "|grad w_eps|_L2(collar 4 delta)");
    let mut terms: Vec<Series> =
        (1..=3).map(|k| Series::new(&format!("term{k}"), "eps", &format!("|G{k}|_L2"))).collect();
    for (i, &eps) in eps_list.iter().enumerate() {
        let start = Instant::now();
        let p = template.with(cells_for(template.side, eps), eps);
        let y_spacing = p.side / p.n as f64 / eps;
        let cell = cell_grid(field, &opts.rule, t_max, y_spacing)?;
        let t = 1.0 / eps;
        let psi = solve_corrector_on(field, t_max, &cell, opts.rule.policy, &opts.solve)?;
        let a_hat = effective_tensor(&psi)?;
        let set = solve_corrector_on(field, t, &cell, opts.rule.policy, &opts.solve)?;
        let dset = flux_and_dual(&set)?;
        let dt = measure_delta(&set, &dset, &psi.grad_chi())?;
        let delta = dt.total.max(2.0 * eps);

        let (ue, _) = solve_dirichlet(&p, CoefficientSource::Field(field), &opts.solve)?;
        let (u0, _) =
            solve_dirichlet(&p.with(p.n, 0.0), CoefficientSource::Effective(&a_hat.values, field.m()), &opts.solve)?;
        let input = ExpansionInput {
            epsilon: eps,
            delta,
            u_eps: &ue,
            u0: &u0,
            correctors: &set,
            dual: &dset,
            a_hat: &a_hat.values,
        };
        let (w, er) = build_expansion(&input, &opts.solve)?;
        if let Some(dir) = &opts.dump_dir {
            std::fs::create_dir_all(dir)?;
            write_apf(dir.join(format!("w_eps_{i}.apf")), &w)?;
        }
        h1.push(delta, er.h1);
        by_eps.push(eps, er.h1);
        deltas.push(eps, delta);
        dual.push(eps, er.dual_norm);
        collar.push(eps, er.collar_grad_l2);
        for (s, v) in terms.iter_mut().zip(er.terms) {
            s.push(eps, v);
        }
        rep.time(&format!("eps={eps}"), start.elapsed().as_secs_f64());
    }
    rep.values.insert("Tmax".into(), t_max);
    rep.series.extend([h1, by_eps, deltas, dual, collar]);
    rep.series.extend(terms);
    if rep.fit("h1err").is_none() {
        rep.notes.push("H1 error series is degenerate; slope not fitted".into());
    }
    rep.fit("h1errEps");
    rep.notes.push("delta floored at 2 eps; psi-proxy is grad chi at T_max on the same cell grid".into());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::ScalarFunction;
    use crate::tensor::Tensor;
    use std::f64::consts::TAU;

    fn problem(dim: usize) -> DirichletProblem {
        DirichletProblem {
            dim,
            n: 16,
            epsilon: 0.0,
            body: ScalarFunction::Constant { value: 1.0 },
            boundary: ScalarFunction::Constant { value: 0.0 },
            lower: 0.0,
            side: 1.0,
        }
    }

    #[test]
    fn constant_field_expansion_is_exact() {
        let f = CoefficientField::<f64>::constant(1, 1, Tensor::scaled_identity(1, 2.0), 0.5).unwrap();
        let rep = h1_error_study(&f, &[1.0 / 4.0, 1.0 / 8.0], &problem(1), &TwoScaleOptions::default()).unwrap();
        let ys = rep.series.iter().find(|s| s.name == "h1errEps").unwrap().ys();
        assert!(ys.iter().all(|&v| v < 1e-8), "{ys:?}");
    }

    #[test]
    fn one_dimensional_rate_against_delta() {
        let f =
            CoefficientField::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0])).unwrap();
        let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let o = TwoScaleOptions { solve: SolveOptions { tol: 1e-8, ..Default::default() }, ..Default::default() };
        let rep = h1_error_study(&f, &eps, &problem(1), &o).unwrap();
        let fit = rep.fits["h1err"].clone().unwrap();
        assert!(fit.slope >= 0.4 && fit.slope < 0.6, "slope {}", fit.slope);
        let h1 = rep.series("h1errEps").unwrap().ys();
        assert!(h1.windows(2).all(|w| w[1] < w[0]));
        // the collar carries the error
        let collar = rep.series("collar").unwrap().ys();
        for (c, h) in collar.iter().zip(&h1) {
            assert!(*c >= 0.9 * h);
        }
        let dual = rep.series("dualNorm").unwrap().ys();
        for (k, dn) in dual.iter().enumerate() {
            let sum: f64 = (1..=3).map(|t| rep.series(&format!("term{t}")).unwrap().points[k].1).sum();
            assert!(sum >= 0.99 * dn, "{sum} < {dn}");
        }
    }
}
