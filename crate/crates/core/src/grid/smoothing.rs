use rayon::prelude::*;

use super::fft::CubeFft;
use super::{DiscreteField, Grid, Location};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Offsets (in nodes) and weights of the unit-mass bump `c·exp(−1/(1−|x/ε|²))`.
pub fn mollifier_weights<T: Real>(grid: &Grid<T>, epsilon: T) -> Result<Vec<([isize; 3], T)>> {
    let h = grid.h();
    if epsilon < h + h {
        return Err(Error::arg(format!(
            "mollifier radius {epsilon} under-resolved: need at least two cells (h = {h})"
        )));
    }
    let d = grid.dim();
    let r = (epsilon / h).ceil().to_isize().unwrap_or(0);
    let mut out = Vec::new();
    let mut iter = [0isize; 3];
    let span = (2 * r + 1) as usize;
    for lin in 0..span.pow(d as u32) {
        let mut rem = lin;
        for k in (0..d).rev() {
            iter[k] = (rem % span) as isize - r;
            rem /= span;
        }
        let rho2: T = iter[..d]
            .iter()
            .map(|&o| {
                let x = T::lit(o as f64) * h / epsilon;
                x * x
            })
            .sum();
        if rho2 < T::one() {
            let w = (-T::one() / (T::one() - rho2)).exp();
            if w > T::zero() {
                out.push((iter, w));
            }
        }
    }
    let total: T = out.iter().map(|(_, w)| *w).sum();
    for (_, w) in out.iter_mut() {
        *w = *w / total;
    }
    Ok(out)
}

/// `S_ε u`: convolution with the unit-mass bump of radius ε. Periodic grids wrap;
/// Dirichlet grids extend by zero.
pub fn mollify<T: Real>(u: &DiscreteField<T>, epsilon: T) -> Result<DiscreteField<T>> {
    if u.location() != Location::Node {
        return Err(Error::arg("mollify expects a node field"));
    }
    let g = u.grid();
    let weights = mollifier_weights(g, epsilon)?;
    let d = g.dim();
    let s = g.nodes_per_side() as isize;
    let n = g.num_nodes();
    let periodic = g.is_periodic();
    let mut out = DiscreteField::zeros(g, u.components(), Location::Node);
    for c in 0..u.components() {
        let src = u.component(c);
        out.component_mut(c).par_iter_mut().enumerate().for_each(|(idx, slot)| {
            let p = g.multi_index(idx);
            let mut acc = T::zero();
            'w: for (off, w) in &weights {
                let mut q = [0usize; 3];
                for k in 0..d {
                    let mut v = p[k] as isize + off[k];
                    if periodic {
                        v = v.rem_euclid(s);
                    } else if v < 0 || v >= s {
                        continue 'w;
                    }
                    q[k] = v as usize;
                }
                acc = acc + *w * src[g.linear_index(&q)];
            }
            *slot = acc;
        });
    }
    debug_assert_eq!(out.data().len(), n * u.components());
    Ok(out)
}

/// `g ∗ Φ_t` with the heat kernel of `∂_t u = Δu`: the Fourier multiplier
/// `exp(−t|ξ|²)` applied componentwise on a periodic grid.
pub fn heat_smooth<T: Real>(g: &DiscreteField<T>, t: T) -> Result<DiscreteField<T>> {
    let grid = g.grid();
    if !grid.is_periodic() {
        return Err(Error::Unsupported("heat smoothing needs a periodic grid".into()));
    }
    if !(t > T::zero()) {
        return Err(Error::arg("heat time must be positive"));
    }
    let fft = CubeFft::new(grid.dim(), grid.n());
    let q = T::TAU() / grid.side();
    let mut out = g.clone();
    for c in 0..g.components() {
        let res = fft.apply_multiplier(g.component(c), |k| {
            let xi2: T = k.iter().map(|&ki| (T::lit(ki as f64) * q).powi(2)).sum();
            (-t * xi2).exp()
        });
        out.component_mut(c).copy_from_slice(&res);
    }
    Ok(out)
}

/// Boundary cutoff `η_δ`: zero within `δ` of the boundary, one beyond `2δ`,
/// with a C^∞ ramp in between (slope at most `2/δ`).
pub fn cutoff<T: Real>(grid: &Grid<T>, delta: T) -> Result<DiscreteField<T>> {
    if grid.is_periodic() {
        return Err(Error::arg("cutoff needs a Dirichlet grid"));
    }
    if !(delta > T::zero()) {
        return Err(Error::arg("cutoff width must be positive"));
    }
    let data = (0..grid.num_nodes()).map(|idx| smooth_ramp((grid.boundary_distance(idx) - delta) / delta)).collect();
    DiscreteField::from_data(grid, 1, Location::Node, data)
}

/// `0` for `s ≤ 0`, `1` for `s ≥ 1`, smooth in between.
fn smooth_ramp<T: Real>(s: T) -> T {
    let f = |x: T| if x > T::zero() { (-T::one() / x).exp() } else { T::zero() };
    if s <= T::zero() {
        T::zero()
    } else if s >= T::one() {
        T::one()
    } else {
        let a = f(s);
        a / (a + f(T::one() - s))
    }
}
