use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{geometric_menu, log_spaced, log_trapezoid};
use crate::coeff::{rho, CoefficientField, SamplingPlan};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Inputs of `Θ_{k,σ}(T) = ∫₁^T inf_{1≤L≤t} {ρ_k(L,t) + exp(−ct²/L²)} (T/t)^σ dt`.
///
/// `rho[a][b]` is `ρ_k(l_values[b], t_values[a])`; entries with `L > t` are never read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThetaSpec {
    pub k: usize,
    pub sigma: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    pub t_max: f64,
    pub l_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
}

fn default_c() -> f64 {
    0.1
}

/// Largest ratio between consecutive `t` samples.
const MAX_T_RATIO: f64 = 2.0 + 1e-9;

/// One quadrature node of the `Θ` integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThetaRow {
    pub t: f64,
    pub l_star: f64,
    pub rho: f64,
    pub exp_term: f64,
    pub integrand: f64,
}

impl ThetaSpec {
    /// Table for `ρ ≡ 0`.
    pub fn zero(k: usize, sigma: f64, c: f64, t_max: f64) -> Self {
        Self::from_fn(k, sigma, c, t_max, geometric_menu(t_max), |_, _| 0.0)
    }

    /// Samples `rho(L, t)` on the geometric `L` menu and a factor-two `t` grid.
    pub fn from_fn(
        k: usize,
        sigma: f64,
        c: f64,
        t_max: f64,
        l_values: Vec<f64>,
        rho: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let t_values = t_grid(t_max);
        let rho = t_values.iter().map(|&t| l_values.iter().map(|&l| rho(l, t)).collect()).collect();
        Self { k, sigma, c, t_max, l_values, t_values, rho }
    }

    /// Measures `ρ_k(L, t)` of a coefficient field at every sample with `L ≤ t`.
    pub fn from_field<T: Real>(
        field: &CoefficientField<T>,
        k: usize,
        sigma: f64,
        c: f64,
        t_max: f64,
        q_bar: f64,
        plan: &SamplingPlan,
    ) -> Result<Self> {
        let l_values = geometric_menu(t_max);
        let t_values = t_grid(t_max);
        let pairs: Vec<(usize, usize)> = (0..t_values.len())
            .flat_map(|a| (0..l_values.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| l_values[b] <= t_values[a] * (1.0 + 1e-12))
            .collect();
        let vals: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| rho(field, k, l_values[b], t_values[a], q_bar, plan).map(|v| v.as_f64()))
            .collect::<Result<_>>()?;
        let mut table = vec![vec![0.0; l_values.len()]; t_values.len()];
        for (&(a, b), v) in pairs.iter().zip(vals) {
            table[a][b] = v;
        }
        Ok(Self { k, sigma, c, t_max, l_values, t_values, rho: table })
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::arg(format!(
                "sigma must lie in (0, 1), got {} (the integral diverges logarithmically at 1)",
                self.sigma
            )));
        }
        if !(self.t_max >= 1.0) || !(self.c > 0.0) {
            return Err(Error::arg("need T >= 1 and c > 0"));
        }
        if self.rho.len() != self.t_values.len() || self.rho.iter().any(|r| r.len() != self.l_values.len()) {
            return Err(Error::arg("rho table shape does not match the sample axes"));
        }
        if self.rho.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::arg("rho samples must be finite and non-negative"));
        }
        if !self.l_values.iter().any(|&l| (l - 1.0).abs() < 1e-12) {
            return Err(Error::CoverageGap("L = 1 missing from the L samples".into()));
        }
        let ts = &self.t_values;
        if ts.is_empty() || ts[0] > 1.0 + 1e-12 || *ts.last().unwrap() < self.t_max * (1.0 - 1e-12) {
            return Err(Error::CoverageGap(format!("t samples do not cover [1, {}]", self.t_max)));
        }
        for w in ts.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::arg("t samples must increase"));
            }
            if w[0] < self.t_max && w[1] / w[0].max(1.0) > MAX_T_RATIO {
                return Err(Error::CoverageGap(format!("no samples between t = {} and t = {}", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// `ρ(L_b, t)` interpolated linearly in `log t`.
    fn rho_at(&self, b: usize, t: f64) -> f64 {
        let ts = &self.t_values;
        let a = ts.partition_point(|&s| s <= t);
        if a == 0 {
            return self.rho[0][b];
        }
        if a == ts.len() {
            return self.rho[a - 1][b];
        }
        let (t0, t1) = (ts[a - 1].max(1e-300), ts[a]);
        let w = (t / t0).ln() / (t1 / t0).ln();
        (1.0 - w) * self.rho[a - 1][b] + w * self.rho[a][b]
    }

    fn row(&self, t: f64) -> ThetaRow {
        let mut best = ThetaRow { t, l_star: 1.0, rho: 0.0, exp_term: 0.0, integrand: f64::INFINITY };
        for (b, &l) in self.l_values.iter().enumerate() {
            if l < 1.0 - 1e-12 || l > t * (1.0 + 1e-12) {
                continue;
            }
            let r = self.rho_at(b, t);
            let e = (-self.c * t * t / (l * l)).exp();
            if r + e < best.integrand {
                best = ThetaRow { t, l_star: l, rho: r, exp_term: e, integrand: r + e };
            }
        }
        best.integrand *= (self.t_max / t).powf(self.sigma);
        best
    }
}

fn t_grid(t_max: f64) -> Vec<f64> {
    let n = ((t_max.max(1.0).log2() * 4.0).ceil() as usize).max(1) + 1;
    log_spaced(1.0, t_max.max(1.0), n.max(2))
}

/// Quadrature rows on a log-spaced grid of `[1, T]` (64 nodes per doubling).
pub fn theta_table(spec: &ThetaSpec) -> Result<Vec<ThetaRow>> {
    spec.validate()?;
    if spec.t_max == 1.0 {
        return Ok(vec![spec.row(1.0)]);
    }
    let n = ((spec.t_max.log2() * 64.0).ceil() as usize).max(64) + 1;
    Ok(log_spaced(1.0, spec.t_max, n).into_iter().map(|t| spec.row(t)).collect())
}

/// `Θ_{k,σ}(T)` by the trapezoid rule in `log t`.
pub fn theta_bound(spec: &ThetaSpec) -> Result<f64> {
    let rows = theta_table(spec)?;
    if rows.len() < 2 {
        return Ok(0.0);
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let fs: Vec<f64> = rows.iter().map(|r| r.integrand).collect();
    Ok(log_trapezoid(&ts, &fs))
}

/// CSV with columns `t,L*,rho,expTerm,integrand`.
pub fn theta_csv(rows: &[ThetaRow]) -> String {
    let mut s = String::from("t,L*,rho,expTerm,integrand\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.t, r.l_star, r.rho, r.exp_term, r.integrand));
    }
    s
}
