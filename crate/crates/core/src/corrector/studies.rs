use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{solve_corrector, solve_corrector_on, GridRule};
use crate::coeff::{CoefficientField, SamplingPlan};
use crate::ergodic::{theta_bound, ThetaSpec};
use crate::error::{Error, Result};
use crate::grid::{windowed_norm, DiscreteField};
use crate::report::{ExperimentReport, Series};
use crate::scalar::Real;
use crate::solver::{edge_flux, SolveOptions};

/// `Θ_{k,σ}(T)` comparison attached to a growth study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ThetaOptions {
    pub k: usize,
    pub sigma: f64,
    pub c: f64,
    pub q_bar: f64,
    pub plan: SamplingPlan,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self { k: 1, sigma: 0.5, c: 0.1, q_bar: 4.0, plan: SamplingPlan::default() }
    }
}

fn check_dyadic(ts: &[f64]) -> Result<()> {
    if ts.len() < 2 {
        return Err(Error::arg("need at least two values of T"));
    }
    for w in ts.windows(2) {
        if (w[1] / w[0] - 2.0).abs() > 1e-12 {
            return Err(Error::arg(format!("T list must be dyadic, got {} then {}", w[0], w[1])));
        }
    }
    Ok(())
}

fn norms_are_zero(s: &Series) -> bool {
    s.ys().iter().all(|&v| v <= 1e-14)
}

/// Measures `‖∇χ_T‖_{S²₁}`, `‖χ_T‖_{S²₁}` and `‖∇χ_T‖_{S²_T} + T⁻¹‖χ_T‖_{S²_T}` over a
/// dyadic list of `T`, each solved on its own grid.
pub fn growth_study<T: Real>(
    field: &CoefficientField<T>,
    ts: &[f64],
    rule: &GridRule,
    opts: &SolveOptions,
    theta: Option<&ThetaOptions>,
) -> Result<ExperimentReport> {
    check_dyadic(ts)?;
    let mut rep = ExperimentReport::new("growth");
    rep.field_hash = Some(field.content_hash());
    rep.config = serde_json::json!({ "T": ts, "gridRule": rule, "tol": opts.tol });
    let mut grad = Series::new("gradChi", "T", "|grad chi_T|_S2_1");
    let mut chi = Series::new("chi", "T", "|chi_T|_S2_1");
    let mut energy = Series::new("energy", "T", "|grad chi_T|_S2_T + |chi_T|_S2_T / T");
    let mut iterations = Series::new("iterations", "T", "max Krylov iterations");
    for &t in ts {
        let start = Instant::now();
        let set = solve_corrector(field, t, rule, opts)?;
        rep.time(&format!("solve T={t}"), start.elapsed().as_secs_f64());
        grad.push(t, set.grad_norm(1.0)?.as_f64());
        chi.push(t, set.chi_norm(1.0)?.as_f64());
        energy.push(t, set.grad_norm(t)?.as_f64() + set.chi_norm(t)?.as_f64() / t);
        iterations.push(t, set.reports().iter().map(|r| r.iterations).max().unwrap_or(0) as f64);
    }
    let gs = grad.ys();
    let (gmin, gmax) = gs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let degenerate = norms_are_zero(&chi);
    rep.values.insert("gradRatio".into(), if gmax == 0.0 { 1.0 } else { gmax / gmin });
    rep.values.insert("energyMax".into(), energy.ys().iter().cloned().fold(0.0, f64::max));
    rep.series.extend([grad, chi, energy, iterations]);
    for name in ["gradChi", "chi", "energy"] {
        rep.fit(name);
    }
    if degenerate {
        rep.notes.push("all corrector norms vanish; slopes are degenerate".into());
    }
    if let Some(th) = theta {
        let start = Instant::now();
        let t_max = ts[ts.len() - 1];
        let spec = ThetaSpec::from_field(field, th.k, th.sigma, th.c, t_max, th.q_bar, &th.plan)?;
        let mut series = Series::new("theta", "T", "Theta_k_sigma(T)");
        for &t in ts {
            series.push(t, theta_bound(&ThetaSpec { t_max: t, ..spec.clone() })?);
        }
        rep.series.push(series);
        rep.fit("theta");
        rep.time("theta", start.elapsed().as_secs_f64());
    }
    Ok(rep)
}

/// `‖χ_T − χ_{2T}‖_{S²₁}` for consecutive dyadic `T`, all solved on the grid built for
/// `2·T_max`. The decay exponent `β̂` is minus the fitted slope.
pub fn cauchy_study<T: Real>(
    field: &CoefficientField<T>,
    ts: &[f64],
    rule: &GridRule,
    opts: &SolveOptions,
) -> Result<ExperimentReport> {
    check_dyadic(ts)?;
    let t_top = 2.0 * ts[ts.len() - 1];
    let grid = rule.grid_for(field, t_top)?;
    let mut all: Vec<f64> = ts.to_vec();
    all.push(t_top);
    let start = Instant::now();
    let sets =
        all.iter().map(|&t| solve_corrector_on(field, t, &grid, rule.policy, opts)).collect::<Result<Vec<_>>>()?;
    let mut rep = ExperimentReport::new("cauchy");
    rep.time("solve", start.elapsed().as_secs_f64());
    rep.field_hash = Some(field.content_hash());
    rep.config = serde_json::json!({
        "T": ts,
        "gridRule": rule,
        "tol": opts.tol,
        "grid": { "n": grid.n(), "boxSide": grid.side().as_f64() },
    });
    let two = T::lit(2.0);
    let one = T::one();
    let mut diff = Series::new("cauchy", "T", "|chi_T - chi_2T|_S2_1");
    let mut diff_grad = Series::new("cauchyGrad", "T", "|grad chi_T - grad chi_2T|_S2_1");
    for (i, &t) in ts.iter().enumerate() {
        let (a, b) = (&sets[i], &sets[i + 1]);
        diff.push(t, windowed_norm(&a.chi().sub(&b.chi())?, two, one)?.as_f64());
        diff_grad.push(t, windowed_norm(&a.grad_chi().sub(&b.grad_chi())?, two, one)?.as_f64());
    }
    let degenerate = norms_are_zero(&diff);
    rep.series.extend([diff, diff_grad]);
    let fit = rep.fit("cauchy");
    rep.fit("cauchyGrad");
    match fit {
        Some(f) => {
            let (lo, hi) = f.slope_interval();
            rep.values.insert("betaHat".into(), -f.slope);
            rep.values.insert("betaLow".into(), -hi);
            rep.values.insert("betaHigh".into(), -lo);
        }
        None if degenerate => rep.notes.push("all differences vanish; decay exponent is degenerate".into()),
        None => rep.notes.push("decay exponent could not be fitted".into()),
    }
    // ψ-proxy: ψ := ∇χ_{2T_max}
    let psi = sets[sets.len() - 1].grad_chi();
    let mu = field.mu().as_f64();
    let mut gap = f64::INFINITY;
    for set in &sets[..sets.len() - 1] {
        let (q, e) = proxy_forms(set, &psi)?;
        gap = gap.min(q - mu * e);
    }
    rep.values.insert("psiProxyGap".into(), gap);
    rep.notes.push("psi-proxy: the T -> infinity limit is replaced by grad chi at the largest solved T".into());
    Ok(rep)
}

/// `⟨A(ψ − ∇χ_T)·ψ⟩` and `⟨|ψ − ∇χ_T|²⟩` on the solve box, column-summed.
fn proxy_forms<T: Real>(set: &super::CorrectorSet<T>, psi: &DiscreteField<T>) -> Result<(f64, f64)> {
    let g = set.grid();
    let (d, m) = (g.dim(), set.field().m());
    let side = d * m;
    let n = g.num_nodes() as f64;
    let (mut q, mut e) = (0.0, 0.0);
    for col in 0..side {
        let p = psi.extract_range(col * side, side);
        let diff = p.sub(&set.gradients()[col])?;
        let flux = edge_flux(set.box_field(), &diff)?;
        q += flux.inner(&p).as_f64() / n;
        e += diff.inner(&diff).as_f64() / n;
    }
    Ok((q, e))
}
