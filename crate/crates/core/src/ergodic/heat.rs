use serde::{Deserialize, Serialize};

use crate::coeff::{omega, SamplingPlan};
use crate::error::{Error, Result};
use crate::grid::{gradient, heat_smooth, mean, windowed_norm, DiscreteField};
use crate::report::{ExperimentReport, Series};
use crate::scalar::{max_abs, Real};

/// Fitted pair `(C^k, c)` of the heat-kernel ergodic bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeatCalibration {
    pub big_c: f64,
    pub c: f64,
}

struct Samples {
    ts: Vec<f64>,
    sup: Vec<f64>,
    grad: Vec<f64>,
}

fn sample<T: Real>(g: &DiscreteField<T>, ts: &[f64]) -> Result<Samples> {
    let mut sup = Vec::with_capacity(ts.len());
    let mut grad = Vec::with_capacity(ts.len());
    for &t in ts {
        let u = heat_smooth(g, T::lit(t))?;
        sup.push(max_abs(u.data()).as_f64());
        grad.push(max_abs(&gradient(&u)?.pointwise_magnitude()).as_f64());
    }
    Ok(Samples { ts: ts.to_vec(), sup, grad })
}

/// Fits `c` from the decay rate of `‖u(·,t)‖_∞` on the first half of `ts` (halved for
/// safety), then the smallest `C^k` making both bounds hold on that half.
pub fn calibrate_heat(
    ts: &[f64],
    sup: &[f64],
    grad: &[f64],
    omega: f64,
    g_norm: f64,
    k: usize,
    l: f64,
) -> HeatCalibration {
    let half = ts.len().div_ceil(2).max(2).min(ts.len());
    let pts: Vec<(f64, f64)> =
        ts[..half].iter().zip(&sup[..half]).filter(|(_, &v)| v > 0.0).map(|(&t, &v)| (t, v.ln())).collect();
    let rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
        if sxx > 0.0 {
            (-sxy / sxx).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let c = 0.5 * rate * k as f64 * l * l;
    let mut big_c = 0.0f64;
    for i in 0..half {
        let rhs = omega + (-c * ts[i] / (k as f64 * l * l)).exp() * g_norm;
        if rhs > 0.0 {
            big_c = big_c.max(sup[i] / rhs).max(ts[i].sqrt() * grad[i] / rhs);
        }
    }
    HeatCalibration { big_c, c }
}

/// Measures `‖g∗Φ_t‖_∞` and `‖∇(g∗Φ_t)‖_∞` against
/// `C^k{ω_k(g; L, R) + exp(−ct/(kL²))‖g‖_{S²_R}}` (gradient bound divided by `√t`).
/// Without a calibration one is fitted on the first half of `ts` and checked on all.
#[allow(clippy::too_many_arguments)]
pub fn heat_decay<T: Real>(
    g: &DiscreteField<T>,
    k: usize,
    l: f64,
    r: f64,
    ts: &[f64],
    plan: &SamplingPlan,
    period: Option<&[f64]>,
    calibration: Option<HeatCalibration>,
) -> Result<ExperimentReport> {
    if g.components() != 1 {
        return Err(Error::RankMismatch { expected: 1, found: g.components() });
    }
    let scale = max_abs(g.data()).as_f64();
    let m = mean(g)[0].as_f64();
    if m.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::arg(format!("heat decay needs mean-zero data, mean is {m:.3e}")));
    }
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("times must be non-empty and increasing"));
    }
    if ts[0] < k as f64 * r * r {
        return Err(Error::arg(format!("times must satisfy t >= kR^2 = {}", k as f64 * r * r)));
    }
    let om = if scale == 0.0 { 0.0 } else { omega(g, k, l, r, plan, period)?.as_f64() };
    let g_norm = windowed_norm(g, T::lit(2.0), T::lit(r))?.as_f64();
    let s = sample(g, ts)?;
    let cal = calibration.unwrap_or_else(|| calibrate_heat(&s.ts, &s.sup, &s.grad, om, g_norm, k, l));

    let mut rep = ExperimentReport::new("heat-decay");
    rep.config = serde_json::json!({ "k": k, "L": l, "R": r, "t": ts });
    let mut lhs = Series::new("heatSup", "t", "sup|u(t)|");
    let mut lhs_grad = Series::new("heatGradSup", "t", "sqrt(t) sup|grad u(t)|");
    let mut rhs = Series::new("heatBound", "t", "C^k(omega + exp(-ct/(kL^2))|g|_S2R)");
    let mut worst = 0.0f64;
    for (i, &t) in ts.iter().enumerate() {
        let b = cal.big_c * (om + (-cal.c * t / (k as f64 * l * l)).exp() * g_norm);
        lhs.push(t, s.sup[i]);
        lhs_grad.push(t, t.sqrt() * s.grad[i]);
        rhs.push(t, b);
        let excess = s.sup[i].max(t.sqrt() * s.grad[i]) - b;
        worst = worst.max(excess / b.max(1e-300) * (excess > 1e-14 * scale.max(1.0)) as u8 as f64);
    }
    let increase = s.sup.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    rep.series.extend([lhs, lhs_grad, rhs]);
    rep.constants.insert("Ck".into(), cal.big_c);
    rep.constants.insert("c".into(), cal.c);
    rep.values.insert("omega".into(), om);
    rep.values.insert("gNormS2R".into(), g_norm);
    rep.assert_le("heat.bound", "sup-norm and gradient bounds hold on the whole t-grid", worst, 0.0);
    rep.assert_le("heat.monotone", "sup|u(t)| does not increase in t", increase, 1e-12 * scale.max(1.0));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Location};
    use std::f64::consts::{SQRT_2, TAU};

    #[test]
    fn zero_data() {
        let g = Grid::<f64>::periodic(1, 64, 8.0).unwrap();
        let u = DiscreteField::zeros(&g, 1, Location::Node);
        let rep = heat_decay(&u, 1, 1.0, 1.0, &[1.0, 2.0], &SamplingPlan::default(), None, None).unwrap();
        assert!(rep.series("heatSup").unwrap().ys().iter().all(|&v| v == 0.0));
        assert!(rep.all_passed());
    }

    #[test]
    fn cosine_decays_exponentially() {
        let g = Grid::<f64>::periodic(1, 128, 8.0).unwrap();
        let w = TAU / 4.0;
        let u = DiscreteField::from_fn(&g, |x| (w * x[0]).cos());
        let ts = [1.0, 1.25, 1.5, 1.75, 2.0];
        let rep =
            heat_decay(&u, 1, 4.0, 1.0, &ts, &SamplingPlan { shifts: 8, ..Default::default() }, Some(&[4.0]), None)
                .unwrap();
        assert!(rep.values["omega"] < 1e-12);
        for (t, v) in rep.series("heatSup").unwrap().points.iter() {
            assert!((v - (-w * w * t).exp()).abs() < 1e-13, "{t}: {v}");
        }
        assert!(rep.constants["c"] > 0.0);
        assert!(rep.all_passed(), "{:?}", rep.assertions);
    }

    #[test]
    fn quasi_periodic_bound_with_one_calibration() {
        let g = Grid::<f64>::periodic(1, 1024, 64.0).unwrap();
        let field = crate::coeff::CoefficientField::<f64>::scalar_isotropic(
            1,
            3.0,
            &[(vec![1.0], 1.0, 0.0), (vec![SQRT_2], 1.0, 0.0)],
            0.2,
            None,
        )
        .unwrap()
        .periodized(64.0);
        let mut u = DiscreteField::from_fn(&g, |x| field.evaluate(x).get(0, 0) - 3.0);
        let mu = mean(&u)[0];
        u.data_mut().iter_mut().for_each(|v| *v -= mu);
        let ts: Vec<f64> = (0..8).map(|i| 2.0 + i as f64).collect();
        let rep =
            heat_decay(&u, 1, 2.0, 1.0, &ts, &SamplingPlan { shifts: 16, ..Default::default() }, None, None).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.assertions);
    }

    #[test]
    fn rejects_nonzero_mean_and_early_times() {
        let g = Grid::<f64>::periodic(1, 32, 4.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| 1.0 + x[0].sin());
        assert!(heat_decay(&u, 1, 1.0, 1.0, &[1.0], &SamplingPlan::default(), None, None).is_err());
        let v = DiscreteField::from_fn(&g, |x| (std::f64::consts::FRAC_PI_2 * x[0]).sin());
        assert!(heat_decay(&v, 2, 1.0, 1.0, &[1.0], &SamplingPlan::default(), None, None).is_err());
    }
}
