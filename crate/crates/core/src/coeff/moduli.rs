//! Estimators for `S^p_R` norms, mean values and the moduli `ρ_k`, `ω_k`.
//!
//! Every `sup` is a maximum over a sampled set and every `inf` a minimum over a
//! finite z-lattice, so `S^p_R` and the outer sups are lower estimates while the
//! inner infs are upper estimates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{windowed_norm, DiscreteField};
use crate::scalar::Real;
use crate::tensor::Tensor;

use super::difference::{field_difference, grid_difference, DifferenceSpec};
use super::sampling::SamplingPlan;
use super::{CoefficientField, TensorField};

/// Exponent `p` with `k/p = 1/2 − 1/q̄`.
pub fn rho_exponent(k: usize, q_bar: f64) -> Result<f64> {
    if !(q_bar > 2.0) || !q_bar.is_finite() {
        return Err(Error::arg(format!("reverse-Hoelder exponent must exceed 2, got {q_bar}")));
    }
    Ok(k as f64 / (0.5 - 1.0 / q_bar))
}

/// Midpoint quadrature nodes of the cube `[−R, R]^d`.
fn cube_offsets(dim: usize, radius: f64, spacing: f64) -> Vec<Vec<f64>> {
    let q = ((2.0 * radius / spacing).ceil() as usize).max(1);
    let step = 2.0 * radius / q as f64;
    let axis: Vec<f64> = (0..q).map(|i| -radius + (i as f64 + 0.5) * step).collect();
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut v = p.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Windowed `(⨍|g|^p)^{1/p}` maximized over window centers; stops as soon as the
/// running maximum reaches `cap`.
struct Windows {
    centers: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
}

impl Windows {
    fn new(dim: usize, radius: f64, spacing: f64, plan: &SamplingPlan) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::arg("window radius must be positive"));
        }
        if plan.centers == 0 {
            return Err(Error::arg("sampling plan has no window centers"));
        }
        Ok(Self { centers: plan.points(dim, plan.centers, 0), offsets: cube_offsets(dim, radius, spacing) })
    }

    fn norm(&self, f: &impl Fn(&[f64]) -> f64, p: f64, cap: f64) -> f64 {
        let mut best = 0.0f64;
        let mut x = vec![0.0; self.offsets[0].len()];
        for c in &self.centers {
            let mut acc = 0.0;
            for off in &self.offsets {
                for (k, xk) in x.iter_mut().enumerate() {
                    *xk = c[k] + off[k];
                }
                acc += f(&x).powf(p);
            }
            best = best.max((acc / self.offsets.len() as f64).powf(1.0 / p));
            if best >= cap {
                break;
            }
        }
        best
    }
}

/// `‖g‖_{S^p_R}` on `ℝ^d`: maximum over the plan's window centers of the
/// windowed `L^p` average of `|g|`.
pub fn s_norm<T: Real>(g: impl Fn(&[T]) -> T, dim: usize, p: f64, radius: f64, plan: &SamplingPlan) -> Result<T> {
    if p < 1.0 {
        return Err(Error::arg("exponent must be >= 1"));
    }
    let spacing = plan.quad_spacing.unwrap_or(radius / 16.0);
    let w = Windows::new(dim, radius, spacing, plan)?;
    let f = |x: &[f64]| {
        let y: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
        Float::abs(g(&y)).as_f64()
    };
    Ok(T::lit(w.norm(&f, p, f64::INFINITY)))
}

use num_traits::Float;

/// Average of `g` over the cube `Q(0, R)` by the midpoint rule with the given spacing.
pub fn mean_value<T: Real>(g: impl Fn(&[T]) -> T, dim: usize, radius: f64, spacing: f64) -> T {
    let offs = cube_offsets(dim, radius, spacing);
    let n = offs.len();
    let sum: T = offs
        .iter()
        .map(|o| {
            let y: Vec<T> = o.iter().map(|&v| T::lit(v)).collect();
            g(&y)
        })
        .sum();
    sum / T::from_count(n)
}

/// Quadrature spacing resolving every mode of `field` with 16 points per wavelength.
fn resolving_spacing<T: Real>(field: &CoefficientField<T>, radius: f64) -> f64 {
    let w = field.max_frequency().as_f64();
    let cap = radius / 8.0;
    if w > 0.0 {
        cap.min(std::f64::consts::TAU / (16.0 * w))
    } else {
        cap
    }
}

/// `⟨A⟩` estimated on `Q(0, R)`; exact for a periodic field when `2R` spans whole periods.
pub fn field_mean<T: Real>(field: &CoefficientField<T>, radius: f64) -> Tensor<T> {
    let spacing = resolving_spacing(field, radius);
    let offs = cube_offsets(field.dim(), radius, spacing);
    let side = field.dim() * field.m();
    let mut acc = vec![T::zero(); side * side];
    let mut buf = vec![T::zero(); side * side];
    for o in &offs {
        let y: Vec<T> = o.iter().map(|&v| T::lit(v)).collect();
        field.eval_into(&y, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a = *a + *b;
        }
    }
    let n = T::from_count(offs.len());
    Tensor::from_vec(side, acc.into_iter().map(|v| v / n).collect())
}

/// Nested `sup_{y_1} inf_{z_1} … sup_{y_k} inf_{z_k} eval(P)` with alpha–beta style
/// pruning: `eval(P, cap)` may return any value `≥ cap` once it knows the result
/// reaches `cap`.
struct Nested<'a, S, Z, E> {
    k: usize,
    ys: &'a [S],
    zs: Z,
    eval: E,
}

impl<S, Z, E> Nested<'_, S, Z, E>
where
    S: Clone + Sync,
    Z: Fn(&S) -> Vec<S> + Sync,
    E: Fn(&[(S, S)], f64) -> f64 + Sync,
{
    fn run(&self) -> f64 {
        self.ys.par_iter().map(|y| self.inner(&mut Vec::with_capacity(self.k), y, 0.0)).reduce(|| 0.0, f64::max)
    }

    fn outer(&self, chosen: &mut Vec<(S, S)>, cap: f64) -> f64 {
        let mut sup = 0.0f64;
        for y in self.ys {
            sup = sup.max(self.inner(chosen, y, sup));
            if sup >= cap {
                break;
            }
        }
        sup
    }

    fn inner(&self, chosen: &mut Vec<(S, S)>, y: &S, floor: f64) -> f64 {
        let mut inf = f64::INFINITY;
        for z in (self.zs)(y) {
            chosen.push((y.clone(), z));
            let v = if chosen.len() == self.k { (self.eval)(chosen, inf) } else { self.outer(chosen, inf) };
            chosen.pop();
            inf = inf.min(v);
            if inf <= floor {
                break;
            }
        }
        inf
    }
}

fn check_order(k: usize, l: f64, r: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::arg("difference order must be >= 1"));
    }
    if k > 2 {
        return Err(Error::Unsupported(format!("moduli of order {k} (only k <= 2)")));
    }
    if !(l > 0.0) || !(r > 0.0) {
        return Err(Error::arg("L and R must be positive"));
    }
    Ok(())
}

/// Integer vectors `m` with `|m|·step ≤ L`, sorted by length (origin first).
fn ball_lattice(dim: usize, l: f64, step: f64) -> Vec<Vec<isize>> {
    let r = (l / step + 1e-9).floor() as isize;
    let mut out: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-r..=r).map(move |i| {
                    let mut v = p.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    let len2 = |m: &Vec<isize>| m.iter().map(|&v| (v * v) as f64).sum::<f64>();
    out.retain(|m| len2(m).sqrt() * step <= l * (1.0 + 1e-12));
    out.sort_by(|a, b| len2(a).total_cmp(&len2(b)).then_with(|| a.cmp(b)));
    out
}

/// `ρ_k(L, R)` of a coefficient field with `p = k/(1/2 − 1/q̄)`.
///
/// For `k = 2` the partition sum is `‖Δ_{12}A‖ + ‖Δ_1A‖·‖Δ_2A‖`. When the field is
/// periodic, `y` reduced modulo the period joins the z-candidates.
pub fn rho<T: Real>(
    field: &CoefficientField<T>,
    k: usize,
    l: f64,
    r: f64,
    q_bar: f64,
    plan: &SamplingPlan,
) -> Result<T> {
    check_order(k, l, r)?;
    let p = rho_exponent(k, q_bar)?;
    if field.is_constant() {
        return Ok(T::zero());
    }
    let d = field.dim();
    let spacing = plan.quad_spacing.unwrap_or_else(|| resolving_spacing(field, r));
    let windows = Windows::new(d, r, spacing, plan)?;
    let ys = plan.points(d, plan.shifts, 1);
    let step = plan.z_step(l);
    let lattice: Vec<Vec<f64>> =
        ball_lattice(d, l, step).into_iter().map(|m| m.into_iter().map(|v| v as f64 * step).collect()).collect();
    let period: Option<Vec<f64>> = field.period().map(|p| p.iter().map(|v| v.as_f64()).collect());
    let zs = |y: &Vec<f64>| {
        let mut out = Vec::with_capacity(lattice.len() + 1);
        if let Some(per) = &period {
            let z: Vec<f64> = y.iter().zip(per).map(|(&v, &q)| v - q * (v / q).round()).collect();
            if z.iter().map(|v| v * v).sum::<f64>().sqrt() <= l {
                out.push(z);
            }
        }
        out.extend(lattice.iter().cloned());
        out
    };
    let norm_of = |pairs: &[(Vec<f64>, Vec<f64>)], cap: f64| {
        let spec = DifferenceSpec::new(
            pairs
                .iter()
                .map(|(y, z)| (y.iter().map(|&v| T::lit(v)).collect(), z.iter().map(|&v| T::lit(v)).collect()))
                .collect(),
        )
        .expect("valid shifts");
        let f = |x: &[f64]| {
            let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
            crate::scalar::norm2(&field_difference(field, &spec, &xt)).as_f64()
        };
        windows.norm(&f, p, cap)
    };
    let eval = |pairs: &[(Vec<f64>, Vec<f64>)], cap: f64| -> f64 {
        if pairs.len() == 1 {
            return norm_of(pairs, cap);
        }
        let joint = norm_of(pairs, cap);
        if joint >= cap {
            return joint;
        }
        let a = norm_of(&pairs[..1], f64::INFINITY);
        if a == 0.0 {
            return joint;
        }
        let b = norm_of(&pairs[1..], (cap - joint) / a);
        joint + a * b
    };
    let nested = Nested { k, ys: &ys, zs, eval };
    Ok(T::lit(nested.run()))
}

/// `ω_k(g; L, R)` of a periodic grid function: nested sup/inf of `‖Δ_P g‖_{S²_R}`
/// with shifts rounded to whole nodes. `period`, when given, adds the reduction of
/// `y` modulo that period to the z-candidates.
pub fn omega<T: Real>(
    u: &DiscreteField<T>,
    k: usize,
    l: f64,
    r: f64,
    plan: &SamplingPlan,
    period: Option<&[f64]>,
) -> Result<T> {
    check_order(k, l, r)?;
    let g = u.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("omega needs a periodic grid".into()));
    }
    if plan.shifts == 0 {
        return Err(Error::arg("sampling plan has no shifts"));
    }
    let d = g.dim();
    let h = g.h().as_f64();
    let n = g.n();
    let step_nodes = ((plan.z_step(l) / h).round() as isize).max(1);
    let lattice: Vec<Vec<isize>> = ball_lattice(d, l, step_nodes as f64 * h)
        .into_iter()
        .map(|m| m.into_iter().map(|v| v * step_nodes).collect())
        .collect();
    let unit = SamplingPlan { span: n as f64, ..plan.clone() };
    let ys: Vec<Vec<isize>> = unit
        .points(d, plan.shifts, 1)
        .into_iter()
        .map(|p| p.into_iter().map(|v| v.floor() as isize).collect())
        .collect();
    let period_nodes: Option<Vec<isize>> = period.and_then(|per| {
        let m: Vec<f64> = per.iter().map(|&q| q / h).collect();
        m.iter().all(|v| (v - v.round()).abs() < 1e-9).then(|| m.iter().map(|v| v.round() as isize).collect())
    });
    let zs = |y: &Vec<isize>| {
        let mut out = Vec::with_capacity(lattice.len() + 1);
        if let Some(per) = &period_nodes {
            let z: Vec<isize> =
                y.iter().zip(per).map(|(&v, &q)| v - q * ((v as f64 / q as f64).round() as isize)).collect();
            if z.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() * h <= l * (1.0 + 1e-12) {
                out.push(z);
            }
        }
        out.extend(lattice.iter().cloned());
        out
    };
    let radius = T::lit(r);
    let eval = |pairs: &[(Vec<isize>, Vec<isize>)], _cap: f64| -> f64 {
        let du = grid_difference(u, pairs).expect("periodic grid");
        windowed_norm(&du, T::lit(2.0), radius).map(|v| v.as_f64()).unwrap_or(f64::INFINITY)
    };
    // one evaluation validates the window
    windowed_norm(u, T::lit(2.0), radius)?;
    let nested = Nested { k, ys: &ys, zs, eval };
    Ok(T::lit(nested.run()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::{PI, SQRT_2, TAU};

    fn small_plan() -> SamplingPlan {
        SamplingPlan { shifts: 16, centers: 16, span: 16.0, ..Default::default() }
    }

    #[test]
    fn exponent_rule() {
        assert_eq!(rho_exponent(1, 4.0).unwrap(), 4.0);
        assert_eq!(rho_exponent(2, 4.0).unwrap(), 8.0);
        assert!(rho_exponent(1, 2.0).is_err());
    }

    #[test]
    fn s_norm_examples() {
        let plan = small_plan();
        let c = s_norm(|_: &[f64]| -2.5, 2, 3.0, 1.5, &plan).unwrap();
        assert!((c - 2.5).abs() < 1e-12);
        let v = s_norm(|x: &[f64]| (TAU * x[0]).cos(), 1, 2.0, 1.0, &plan).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12, "{v}");
        assert!(s_norm(|_: &[f64]| 1.0, 1, 2.0, 1.0, &SamplingPlan { centers: 0, ..plan }).is_err());
    }

    #[test]
    fn cube_offsets_count() {
        assert_eq!(cube_offsets(2, 1.0, 0.25).len(), 64);
    }

    #[test]
    fn lattice_is_a_ball() {
        let pts = ball_lattice(2, 1.0, 0.5);
        assert_eq!(pts[0], vec![0, 0]);
        assert_eq!(pts.len(), 13);
    }

    #[test]
    fn rho_constant_and_periodic() {
        let plan = small_plan();
        let c = CoefficientField::<f64>::scalar_isotropic(1, 2.0, &[], 0.4, None).unwrap();
        assert_eq!(rho(&c, 1, 1.0, 4.0, 4.0, &plan).unwrap(), 0.0);
        assert_eq!(rho(&c, 2, 1.0, 4.0, 4.0, &plan).unwrap(), 0.0);
        let per =
            CoefficientField::<f64>::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0]))
                .unwrap();
        let v = rho(&per, 1, 1.0, 4.0, 4.0, &plan).unwrap();
        assert!(v <= 1e-10, "{v}");
    }

    #[test]
    fn rho_quasi_periodic_positive_and_monotone() {
        let f = CoefficientField::<f64>::scalar_isotropic(
            1,
            3.0,
            &[(vec![1.0], 1.0, 0.0), (vec![SQRT_2], 1.0, 0.0)],
            0.2,
            None,
        )
        .unwrap();
        let plan = SamplingPlan { z_spacing: Some(0.25), ..small_plan() };
        let vals: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&l| rho(&f, 1, l, 2.0, 4.0, &plan).unwrap()).collect();
        assert!(vals[0] > 0.0);
        assert!(vals[1] <= vals[0] && vals[2] <= vals[1], "{vals:?}");
    }

    #[test]
    fn omega_periodic_vanishes() {
        let g = Grid::<f64>::periodic(1, 128, 8.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| (TAU * x[0]).cos());
        let v = omega(&u, 1, 1.0, 2.0, &small_plan(), None).unwrap();
        assert!(v < 1e-12, "{v}");
        let z = DiscreteField::zeros(&g, 1, crate::grid::Location::Node);
        assert_eq!(omega(&z, 2, 1.0, 2.0, &small_plan(), None).unwrap(), 0.0);
    }

    #[test]
    fn omega_rejects_high_order() {
        let g = Grid::<f64>::periodic(1, 16, 1.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| x[0].sin());
        assert!(matches!(omega(&u, 3, 1.0, 0.5, &small_plan(), None), Err(Error::Unsupported(_))));
    }

    #[test]
    fn field_mean_exact_on_periods() {
        let f = CoefficientField::<f64>::scalar_isotropic(2, 2.0, &[(vec![TAU, 0.0], 0.6, 0.2)], 0.5, None).unwrap();
        let m = field_mean(&f, 1.0);
        assert!((m.get(0, 0) - 2.0).abs() < 1e-13);
        assert!(m.get(0, 1).abs() < 1e-13);
        let q = CoefficientField::<f64>::scalar_isotropic(
            1,
            3.0,
            &[(vec![1.0], 1.0, 0.0), (vec![SQRT_2], 1.0, 0.0)],
            0.2,
            None,
        )
        .unwrap();
        assert!((field_mean(&q, 200.0).get(0, 0) - 3.0).abs() < 0.06);
        assert!((mean_value(|x: &[f64]| (PI * x[0]).sin(), 1, 3.0, 0.01)).abs() < 1e-12);
    }
}
