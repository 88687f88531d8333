//! Oscillation/gradient inequality, heat-kernel ergodic bounds and the `Θ_{k,σ}(T)`
//! integral.

mod heat;
mod theta;

use serde::{Deserialize, Serialize};

use crate::coeff::{omega, SamplingPlan};
use crate::error::{Error, Result};
use crate::grid::{gradient, mean, windowed_norm, DiscreteField};
use crate::scalar::Real;

pub use heat::{calibrate_heat, heat_decay, HeatCalibration};
pub use theta::{theta_bound, theta_csv, theta_table, ThetaRow, ThetaSpec};

/// The pieces of `‖u‖_{S²_R} ≤ |M| + C{sup_y inf_{|z|≤L} ‖Δ_yz u‖_{S²_R} + L‖∇u‖_{S²_R}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OscillationTerms {
    pub lhs: f64,
    pub mean_abs: f64,
    pub difference: f64,
    pub gradient: f64,
}

impl OscillationTerms {
    /// Smallest `C` for which the inequality holds (0 when the lhs is carried by `|M|`).
    pub fn required_constant(&self) -> f64 {
        let excess = self.lhs - self.mean_abs;
        if excess <= 0.0 {
            0.0
        } else {
            excess / (self.difference + self.gradient)
        }
    }
}

/// Evaluates both sides of the oscillation inequality for a scalar node field on a
/// periodic grid. The mean is the box average.
pub fn oscillation_bound<T: Real>(
    u: &DiscreteField<T>,
    l: f64,
    r: f64,
    plan: &SamplingPlan,
    period: Option<&[f64]>,
) -> Result<OscillationTerms> {
    if !(l > 0.0) || l > r {
        return Err(Error::arg(format!("need 0 < L <= R, got L = {l}, R = {r}")));
    }
    let radius = T::lit(r);
    let two = T::lit(2.0);
    let lhs = windowed_norm(u, two, radius)?.as_f64();
    let mean_abs = mean(u).iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
    let difference = omega(u, 1, l, r, plan, period)?.as_f64();
    let grad = windowed_norm(&gradient(u)?, two, radius)?.as_f64();
    Ok(OscillationTerms { lhs, mean_abs, difference, gradient: l * grad })
}

/// Both sides of the reconstruction estimate with `C = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReconstructionTerms {
    pub lhs: f64,
    /// `inf_L {ω_k(g; L, T) + exp(−cT²/L²)‖g‖_{S²_T}}`
    pub first: f64,
    /// `∫₁^T inf_L {ω_k(∇g; L, t) + exp(−ct²/L²)‖∇g‖_{S²_t}} dt`
    pub integral: f64,
    pub rhs: f64,
}

/// Settings for [`reconstruction_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ReconstructionOptions {
    pub k: usize,
    pub c: f64,
    /// Candidate `L` values; entries above the current scale are skipped.
    pub l_menu: Vec<f64>,
    /// Number of log-spaced quadrature nodes on `[1, T]`.
    pub t_points: usize,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { k: 1, c: 0.1, l_menu: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0], t_points: 9 }
    }
}

/// Geometric `L` menu `{1, 2, 4, …}` up to `t`.
pub fn geometric_menu(t: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    while out.last().unwrap() * 2.0 <= t * (1.0 + 1e-12) {
        out.push(out.last().unwrap() * 2.0);
    }
    out
}

pub(crate) fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 || b <= a {
        return vec![a, b];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Trapezoid rule in `log t`: `∫ f dt = ∫ f(t)·t d(log t)`.
pub(crate) fn log_trapezoid(ts: &[f64], fs: &[f64]) -> f64 {
    ts.windows(2).zip(fs.windows(2)).map(|(t, f)| 0.5 * (f[0] * t[0] + f[1] * t[1]) * (t[1] / t[0]).ln()).sum()
}

/// `‖g‖_{S²_1}` against the right-hand side of the reconstruction estimate for a
/// mean-zero scalar node field on a periodic grid.
pub fn reconstruction_bound<T: Real>(
    g: &DiscreteField<T>,
    t_max: f64,
    opts: &ReconstructionOptions,
    plan: &SamplingPlan,
    period: Option<&[f64]>,
) -> Result<ReconstructionTerms> {
    if !(t_max >= 2.0) {
        return Err(Error::arg(format!("T must be at least 2, got {t_max}")));
    }
    if opts.l_menu.is_empty() || opts.l_menu.iter().all(|&l| l > 1.0) {
        return Err(Error::arg("L menu must contain a value <= 1"));
    }
    let two = T::lit(2.0);
    let lhs = windowed_norm(g, two, T::one())?.as_f64();
    let scale = g.data().iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    if scale == 0.0 {
        return Ok(ReconstructionTerms { lhs, first: 0.0, integral: 0.0, rhs: 0.0 });
    }
    let inf_over = |u: &DiscreteField<T>, t: f64| -> Result<f64> {
        let norm = windowed_norm(u, two, T::lit(t))?.as_f64();
        let mut best = f64::INFINITY;
        for &l in opts.l_menu.iter().filter(|&&l| l <= t * (1.0 + 1e-12)) {
            let w = omega(u, opts.k, l, t, plan, period)?.as_f64();
            best = best.min(w + (-opts.c * t * t / (l * l)).exp() * norm);
        }
        Ok(best)
    };
    let first = inf_over(g, t_max)?;
    let dg = gradient(g)?;
    let ts = log_spaced(1.0, t_max, opts.t_points.max(2));
    let fs: Vec<f64> = ts.iter().map(|&t| inf_over(&dg, t)).collect::<Result<_>>()?;
    let integral = log_trapezoid(&ts, &fs);
    Ok(ReconstructionTerms { lhs, first, integral, rhs: first + integral })
}
