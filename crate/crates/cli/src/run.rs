//! Dispatch from a config to the core studies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use aphom_core::bvp::{gradient_profile, liouville_probe, rate_study, solve_dirichlet, CoefficientSource};
use aphom_core::coeff::{rho, CoefficientField, SamplingPlan};
use aphom_core::corrector::{
    cauchy_study, effective_tensor, flux_and_dual, growth_study, solve_corrector, solve_corrector_on, BoxPolicy,
};
use aphom_core::ergodic::{heat_decay, oscillation_bound, theta_bound, theta_csv, theta_table, ThetaSpec};
use aphom_core::grid::{divergence, gradient, heat_smooth, l2_norm, mean, write_apf, DiscreteField, Grid, Location};
use aphom_core::report::{ExperimentReport, Series};
use aphom_core::tensor::Tensor;
use aphom_core::twoscale::h1_error_study;
use aphom_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::*;
use crate::RunError;

/// Report plus where it was written and the process exit code.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub out_dir: PathBuf,
    pub exit_code: i32,
}

/// Runs a config, writes artifacts into `out` (or the config's own `out`) and
/// evaluates its assertions. Exit code 0 iff every assertion passed.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome, RunError> {
    let out_dir = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| {
        PathBuf::from("runs").join(if cfg.name.is_empty() { kind_name(cfg.kind) } else { cfg.name.clone() })
    });
    std::fs::create_dir_all(&out_dir).map_err(|e| RunError::Config(format!("{}: {e}", out_dir.display())))?;
    let mut report = match cfg.precision {
        Precision::F64 => run_typed::<f64>(cfg, &out_dir)?,
        Precision::F32 => run_typed::<f32>(cfg, &out_dir)?,
    };
    let mut echo = cfg.clone();
    echo.out = None;
    report.config = serde_json::json!({ "experiment": echo, "study": report.config });
    for a in &cfg.assertions {
        let value = metric(&report, &a.metric).unwrap_or(f64::NAN);
        let desc = if a.description.is_empty() { a.metric.clone() } else { a.description.clone() };
        match a.op {
            Op::Le => report.assert_le(&a.id, &desc, value, a.value),
            Op::Ge => report.assert_ge(&a.id, &desc, value, a.value),
        };
    }
    report.write(&out_dir)?;
    let exit_code = if report.all_passed() { 0 } else { 1 };
    Ok(RunOutcome { report, out_dir, exit_code })
}

pub fn kind_name(kind: Kind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn load_field<T: Real>(cfg: &ExperimentConfig) -> Result<Option<CoefficientField<T>>, RunError> {
    let Some(path) = cfg.field_path() else { return Ok(None) };
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let f =
        CoefficientField::<T>::from_json_str(&text).map_err(|e| RunError::Field(format!("{}: {e}", path.display())))?;
    f.check_ellipticity().map_err(|e| RunError::Field(format!("{}: {e}", path.display())))?;
    Ok(Some(f))
}

fn require<T: Real>(f: Option<CoefficientField<T>>, kind: Kind) -> Result<CoefficientField<T>, RunError> {
    f.ok_or_else(|| RunError::Config(format!("{} needs a field", kind_name(kind))))
}

fn seeded(plan: &SamplingPlan, seed: u64) -> SamplingPlan {
    plan.clone().with_seed(seed)
}

fn run_typed<T: Real>(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, RunError> {
    let field = load_field::<T>(cfg)?;
    let start = Instant::now();
    let mut rep = match cfg.kind {
        Kind::FieldCheck => field_check(&require(field, cfg.kind)?, cfg)?,
        Kind::Rho => {
            let f = require(field, cfg.kind)?;
            let p: RhoParams = cfg.params()?;
            let plan = seeded(&p.plan, cfg.seed);
            let mut rep = ExperimentReport::new("rho");
            let mut s = Series::new("rho", "L", &format!("rho_{}(L, R={})", p.k, p.r));
            for &l in &p.l_values {
                s.push(l, rho(&f, p.k, l, p.r, p.q_bar, &plan)?.as_f64());
            }
            rep.values.insert("rhoMax".into(), s.ys().into_iter().fold(0.0, f64::max));
            rep.series.push(s);
            rep
        }
        Kind::Corrector => {
            let f = require(field, cfg.kind)?;
            let p: CorrectorParams = cfg.params()?;
            let set = solve_corrector(&f, p.t, &p.rule, &p.solve)?;
            let mut rep = ExperimentReport::new("corrector");
            rep.values.insert("chiS2".into(), set.chi_norm(1.0)?.as_f64());
            rep.values.insert("gradChiS2".into(), set.grad_norm(1.0)?.as_f64());
            rep.values.insert("boxSide".into(), set.grid().side().as_f64());
            rep.values.insert("nodesPerSide".into(), set.grid().n() as f64);
            let iters = set.reports().iter().map(|r| r.iterations).max().unwrap_or(0);
            rep.values.insert("maxIterations".into(), iters as f64);
            if p.save {
                set.save(out.join("corrector"))?;
            }
            rep
        }
        Kind::Effective => effective(&require(field, cfg.kind)?, cfg)?,
        Kind::Dual => dual(&require(field, cfg.kind)?, cfg, out)?,
        Kind::Growth => {
            let f = require(field, cfg.kind)?;
            let p: GrowthParams = cfg.params()?;
            let theta = p.theta.map(|mut t| {
                t.plan.seed = cfg.seed;
                t
            });
            growth_study(&f, &p.t_values, &p.rule, &p.solve, theta.as_ref())?
        }
        Kind::Cauchy => {
            let f = require(field, cfg.kind)?;
            let p: GrowthParams = cfg.params()?;
            cauchy_study(&f, &p.t_values, &p.rule, &p.solve)?
        }
        Kind::Theta => {
            let p: ThetaParams = cfg.params()?;
            let spec = match (&field, p.zero_rho) {
                (Some(f), false) => {
                    ThetaSpec::from_field(f, p.k, p.sigma, p.c, p.t_max, p.q_bar, &seeded(&p.plan, cfg.seed))?
                }
                _ => ThetaSpec::zero(p.k, p.sigma, p.c, p.t_max),
            };
            let rows = theta_table(&spec)?;
            let theta = theta_bound(&spec)?;
            std::fs::write(out.join("theta_table.csv"), theta_csv(&rows)).map_err(aphom_core::Error::from)?;
            let mut rep = ExperimentReport::new("theta");
            let mut s = Series::new("thetaIntegrand", "t", "integrand");
            for r in &rows {
                s.push(r.t, r.integrand);
            }
            rep.series.push(s);
            rep.values.insert("theta".into(), theta);
            rep.values.insert("thetaOverTSigma".into(), theta / p.t_max.powf(p.sigma));
            rep
        }
        Kind::Twoscale => {
            let f = require(field, cfg.kind)?;
            let mut p: TwoScaleParams = cfg.params()?;
            if p.save {
                p.options.dump_dir = Some(out.join("fields"));
            }
            h1_error_study(&f, &p.epsilons, &p.problem, &p.options)?
        }
        Kind::Rate => {
            let f = require(field, cfg.kind)?;
            let mut p: RateParams = cfg.params()?;
            if let Some(t) = p.options.theta.as_mut() {
                t.plan.seed = cfg.seed;
            }
            rate_study(&f, &p.epsilons, &p.problem, &p.options)?
        }
        Kind::Profile => {
            let f = require(field, cfg.kind)?;
            let p: ProfileParams = cfg.params()?;
            let (u, sr) = solve_dirichlet(&p.problem, CoefficientSource::Field(&f), &p.solve)?;
            write_apf(out.join("u.apf"), &u)?;
            let prof = gradient_profile(&u, &p.center, &p.radii, p.problem.epsilon)?;
            let mut rep = ExperimentReport::new("profile");
            let mut s = Series::new("profile", "r", "(avg_B(x0,r) |grad u|^2)^1/2");
            for (&r, &v) in prof.radii.iter().zip(&prof.values) {
                s.push(r, v);
            }
            rep.series.push(s);
            rep.values.insert("iterations".into(), sr.iterations as f64);
            rep
        }
        Kind::Liouville => {
            let p: LiouvilleParams = cfg.params()?;
            let id = Tensor::<T>::identity(p.dim);
            let coeff = match &field {
                Some(f) => CoefficientSource::Field(f),
                None => CoefficientSource::Effective(&id, 1),
            };
            liouville_probe(coeff, p.dim, p.sigma, &p.radii, p.r, p.cells_per_unit, &p.solve)?
        }
        Kind::Ergodic => ergodic(&require(field, cfg.kind)?, cfg)?,
    };
    if rep.field_hash.is_none() {
        rep.field_hash = field_hash::<T>(cfg)?;
    }
    rep.time("total", start.elapsed().as_secs_f64());
    Ok(rep)
}

fn field_hash<T: Real>(cfg: &ExperimentConfig) -> Result<Option<String>, RunError> {
    Ok(load_field::<T>(cfg)?.map(|f| f.content_hash()))
}

fn field_check<T: Real>(f: &CoefficientField<T>, cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let p: FieldCheckParams = cfg.params()?;
    let mut rep = ExperimentReport::new("field-check");
    let cert = f.certificate();
    rep.values.insert("mu".into(), cert.mu);
    rep.values.insert("certLower".into(), cert.lower);
    rep.values.insert("certUpper".into(), cert.upper);
    let (lo, hi) = f.sampled_ellipticity(p.probes, p.span, cfg.seed);
    rep.values.insert("sampledLower".into(), lo);
    rep.values.insert("sampledUpper".into(), hi);
    rep.assert_ge("field.certificate", "certified lower bound >= mu", cert.lower, cert.mu);
    rep.assert_le("field.certificateUpper", "certified upper bound <= 1/mu", cert.upper, 1.0 / cert.mu);
    if let Some(t) = p.effective_t {
        let eff = effective_tensor(&solve_corrector(f, t, &p.rule, &p.solve)?)?;
        let upper = (1.0 + f.dim() as f64) / cert.mu;
        rep.values.insert("effectiveEigMin".into(), eff.eig_range.0);
        rep.values.insert("effectiveEigMax".into(), eff.eig_range.1);
        rep.assert_ge("effective.lower", "sym(A_hat) eigenvalues >= mu", eff.eig_range.0, cert.mu * (1.0 - 1e-12));
        rep.assert_le("effective.upper", "sym(A_hat) eigenvalues <= (1+d)/mu", eff.eig_range.1, upper);
    }
    if let Some(n) = p.sbp_nodes {
        rep.values.insert("sbpDefect".into(), sbp_defect::<T>(f.dim(), f.m(), n, cfg.seed)?);
    }
    Ok(rep)
}

/// `|⟨div F, u⟩ + ⟨F, ∇u⟩| / |⟨F, ∇u⟩|` for random `u`, `F` on a periodic grid.
fn sbp_defect<T: Real>(dim: usize, m: usize, n: usize, seed: u64) -> Result<f64, RunError> {
    let g = Grid::<T>::periodic(dim, n, T::one())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<T> { (0..len).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect() };
    let u = DiscreteField::from_data(&g, m, Location::Node, draw(m * g.num_nodes()))?;
    let f = DiscreteField::from_data(&g, dim * m, Location::Edge, draw(dim * m * g.num_nodes()))?;
    let lhs = divergence(&f)?.inner(&u).as_f64();
    let rhs = f.inner(&gradient(&u)?).as_f64();
    Ok((lhs + rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE))
}

fn effective<T: Real>(f: &CoefficientField<T>, cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let p: EffectiveParams = cfg.params()?;
    let set = solve_corrector(f, p.t, &p.rule, &p.solve)?;
    let eff = effective_tensor(&set)?;
    let mut rep = ExperimentReport::new("effective");
    let a = eff.values.to_f64();
    let side = a.side();
    for r in 0..side {
        for c in 0..side {
            rep.values.insert(format!("aHat_{r}_{c}"), a.get(r, c));
        }
    }
    let mu = f.mu().as_f64();
    rep.values.insert("eigMin".into(), eff.eig_range.0);
    rep.values.insert("eigMax".into(), eff.eig_range.1);
    rep.values.insert("skewNorm".into(), eff.skew_part.to_f64().frobenius());
    rep.values.insert("boxSide".into(), set.grid().side().as_f64());
    rep.values.insert("nodesPerSide".into(), set.grid().n() as f64);
    rep.values.insert("solverTol".into(), p.solve.tol);
    rep.assert_ge("effective.lower", "sym(A_hat) eigenvalues >= mu", eff.eig_range.0, mu * (1.0 - 1e-12));
    rep.assert_le(
        "effective.upper",
        "sym(A_hat) eigenvalues <= (1+d)/mu",
        eff.eig_range.1,
        (1.0 + f.dim() as f64) / mu,
    );
    if let Some(rows) = &p.oracle {
        if rows.len() != side || rows.iter().any(|r| r.len() != side) {
            return Err(RunError::Config(format!("oracle must be {side}x{side}")));
        }
        let o = Tensor::from_vec(side, rows.concat());
        let gap = a.max_abs_diff(&o);
        let scale = o.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        // relative per entry; zero entries are measured against the largest
        let rel = a
            .as_slice()
            .iter()
            .zip(o.as_slice())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / if *y != 0.0 { y.abs() } else { scale }));
        rep.values.insert("oracleGap".into(), gap);
        rep.values.insert("oracleRelGap".into(), rel);
    }
    if p.adjoint {
        let star = effective_tensor(&solve_corrector(&f.adjoint(), p.t, &p.rule, &p.solve)?)?;
        rep.values.insert("adjointGap".into(), star.values.to_f64().max_abs_diff(&a.transpose()));
    }
    Ok(rep)
}

fn dual<T: Real>(f: &CoefficientField<T>, cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, RunError> {
    let p: DualParams = cfg.params()?;
    let mut rep = ExperimentReport::new("dual");
    let mut rec = Series::new("reconstruction", "h", "|div b - ... | reconstruction residual L2");
    let mut div = Series::new("divergence", "h", "|d_i b_ij - T^-2 chi_j| L2");
    let mut bmean = 0.0f64;
    for &n in &p.n_values {
        let g = Grid::<T>::periodic(f.dim(), n, T::lit(p.side))?;
        let set = solve_corrector_on(f, p.t, &g, BoxPolicy::Periodize, &p.solve)?;
        let d = flux_and_dual(&set)?;
        let h = p.side / n as f64;
        rec.push(h, l2_norm(&d.reconstruction_residual()?).as_f64());
        div.push(h, l2_norm(&d.divergence_residual(&set)?).as_f64());
        bmean = d.b_mean.as_slice().iter().fold(bmean, |m, v| m.max(v.as_f64().abs()));
        rep.values.insert(format!("relativeReconstruction_n{n}"), d.relative_reconstruction_error()?.as_f64());
        if p.save {
            d.save(out.join(format!("dual_n{n}")), &set)?;
        }
    }
    rep.values.insert("bMeanMax".into(), bmean);
    rep.series.extend([rec, div]);
    rep.fit("reconstruction");
    rep.fit("divergence");
    Ok(rep)
}

fn ergodic<T: Real>(f: &CoefficientField<T>, cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let p: ErgodicParams = cfg.params()?;
    let side = T::lit(p.side);
    let field = if f.tiles_box(side) { f.clone() } else { f.periodized(side) };
    let g = Grid::<T>::periodic(f.dim(), p.n, side)?;
    let raw = DiscreteField::from_fn(&g, |y| field.evaluate(y).get(0, 0));
    let m = mean(&raw)[0];
    let u = raw.map(|v| v - m);
    let period: Vec<f64> = match f.period() {
        Some(per) if f.tiles_box(side) => per.iter().map(|v| v.as_f64()).collect(),
        _ => vec![p.side; f.dim()],
    };
    let plan = seeded(&p.plan, cfg.seed);
    let mut rep = ExperimentReport::new("ergodic");
    if let Some([s, t]) = p.semigroup {
        let a = heat_smooth(&heat_smooth(&u, T::lit(s))?, T::lit(t))?;
        let b = heat_smooth(&u, T::lit(s + t))?;
        let defect = a.data().iter().zip(b.data()).fold(0.0f64, |acc, (x, y)| acc.max((*x - *y).abs().as_f64()));
        rep.values.insert("semigroupDefect".into(), defect);
    }
    if let Some(h) = &p.heat {
        let sub = heat_decay(&u, p.k, h.l, h.r, &h.t_values, &plan, Some(&period), None)?;
        rep.series.extend(sub.series);
        rep.constants.extend(sub.constants);
        rep.values.extend(sub.values);
        rep.assertions.extend(sub.assertions);
    }
    if let Some(o) = &p.oscillation {
        let mut s = Series::new("oscillationConstant", "sweep point", "required C");
        for &l in &o.l_values {
            for &r in &o.r_values {
                if l <= r {
                    let terms = oscillation_bound(&raw, l, r, &plan, Some(&period))?;
                    s.push((s.points.len() + 1) as f64, terms.required_constant());
                }
            }
        }
        rep.values.insert("oscillationPoints".into(), s.points.len() as f64);
        rep.values.insert("oscillationMaxConstant".into(), s.ys().into_iter().fold(0.0, f64::max));
        rep.series.push(s);
    }
    Ok(rep)
}
