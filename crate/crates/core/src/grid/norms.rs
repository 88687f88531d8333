use super::{gradient, DiscreteField, Grid, Location};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quadrature weight of an entry, accounting for missing Dirichlet edges.
fn entry_weight<T: Real>(u: &DiscreteField<T>, comp: usize, idx: usize) -> T {
    let g = u.grid();
    match u.location() {
        Location::Node => g.node_weight(idx),
        Location::Edge => {
            let axis = comp / (u.components() / g.dim());
            if g.has_edge(idx, axis) {
                // trapezoid in the transverse directions
                let mut w = g.h().powi(g.dim() as i32);
                if !g.is_periodic() {
                    let p = g.multi_index(idx);
                    for k in (0..g.dim()).filter(|&k| k != axis) {
                        if p[k] == 0 || p[k] == g.n() {
                            w = w * T::lit(0.5);
                        }
                    }
                }
                w
            } else {
                T::zero()
            }
        }
    }
}

/// Per-component average over the box.
pub fn mean<T: Real>(u: &DiscreteField<T>) -> Vec<T> {
    let vol = u.grid().volume();
    (0..u.components())
        .map(|c| {
            let s: T = u.component(c).iter().enumerate().map(|(i, &v)| entry_weight(u, c, i) * v).sum();
            s / vol
        })
        .collect()
}

/// `(Σ_c ∫ |u_c|²)^{1/2}` with trapezoidal weights.
pub fn l2_norm<T: Real>(u: &DiscreteField<T>) -> T {
    let mut acc = T::zero();
    for c in 0..u.components() {
        for (i, &v) in u.component(c).iter().enumerate() {
            acc = acc + entry_weight(u, c, i) * v * v;
        }
    }
    acc.sqrt()
}

/// `(‖u‖² + ‖∇u‖²)^{1/2}` for a node field.
pub fn h1_norm<T: Real>(u: &DiscreteField<T>) -> Result<T> {
    let g = gradient(u)?;
    let a = l2_norm(u);
    let b = l2_norm(&g);
    Ok((a * a + b * b).sqrt())
}

/// Sliding window sums along one axis. Returns, for each center node, the
/// weighted sum over the window, or `None` when the window leaves a Dirichlet box.
fn slide_axis<T: Real>(g: &Grid<T>, vals: &[Option<T>], axis: usize, w: usize) -> Vec<Option<T>> {
    let s = g.nodes_per_side();
    let stride = g.stride(axis);
    let half = w / 2;
    let mut out = vec![None; vals.len()];
    let periodic = g.is_periodic();
    let lines = vals.len() / s;
    let mut line = vec![None; s];
    for l in 0..lines {
        // base index of this line: decompose l into the other coordinates
        let outer = l / stride;
        let inner = l % stride;
        let base = outer * stride * s + inner;
        for (k, slot) in line.iter_mut().enumerate() {
            *slot = vals[base + k * stride];
        }
        if periodic {
            // running sum around the ring
            let start = s - half % s;
            let ring: Vec<T> = line.iter().map(|v| v.unwrap_or(T::zero())).collect();
            let mut acc: T = (0..w).map(|t| ring[(start + t) % s]).sum();
            for c in 0..s {
                out[base + c * stride] = Some(acc);
                acc = acc - ring[(start + c) % s] + ring[(start + c + w) % s];
            }
            continue;
        }
        for c in 0..s {
            let v = if c >= half && c - half + w < s {
                let mut acc = Some(T::zero());
                for t in 0..=w {
                    let k = c - half + t;
                    let wt = if t == 0 || t == w { T::lit(0.5) } else { T::one() };
                    acc = match (acc, line[k]) {
                        (Some(a), Some(b)) => Some(a + wt * b),
                        _ => None,
                    };
                }
                acc
            } else {
                None
            };
            out[base + c * stride] = v;
        }
    }
    out
}

/// Window-averaged `|u|^p` for every admissible window center (cube of half side `radius`).
fn window_means<T: Real>(u: &DiscreteField<T>, p: T, radius: T) -> Result<(Vec<Option<T>>, bool)> {
    if !(radius > T::zero()) {
        return Err(Error::arg("window radius must be positive"));
    }
    if p < T::one() {
        return Err(Error::arg("exponent must be >= 1"));
    }
    let g = u.grid();
    let mags: Vec<T> = u.pointwise_magnitude().into_iter().map(|m| m.powf(p)).collect();
    let cells = ((radius + radius) / g.h()).round().to_usize().unwrap_or(0).max(1);
    if g.is_periodic() && cells >= g.n() {
        let avg = mags.iter().copied().sum::<T>() / T::from_count(mags.len());
        return Ok((vec![Some(avg)], true));
    }
    if !g.is_periodic() && cells > g.n() {
        return Err(Error::arg("window larger than the Dirichlet box"));
    }
    let mut vals: Vec<Option<T>> = mags.into_iter().map(Some).collect();
    for axis in 0..g.dim() {
        vals = slide_axis(g, &vals, axis, cells);
    }
    let count = T::from_count(cells).powi(g.dim() as i32);
    Ok((vals.into_iter().map(|v| v.map(|s| s / count)).collect(), false))
}

/// Discrete `S^p_R` norm: maximum over grid-aligned cube windows of half side `radius`
/// of `(⨍|u|^p)^{1/p}`. On a periodic grid every window position is visited; a window
/// wider than the box degenerates to the global average.
pub fn windowed_norm<T: Real>(u: &DiscreteField<T>, p: T, radius: T) -> Result<T> {
    windowed_norm_where(u, p, radius, |_| true)
}

/// Like [`windowed_norm`], restricted to window centers accepted by `keep`.
pub fn windowed_norm_where<T: Real>(u: &DiscreteField<T>, p: T, radius: T, keep: impl Fn(&[T]) -> bool) -> Result<T> {
    let (means, global) = window_means(u, p, radius)?;
    if global {
        return Ok(means[0].unwrap_or(T::zero()).powf(T::one() / p));
    }
    let g = u.grid();
    let d = g.dim();
    let mut best: Option<T> = None;
    for (idx, m) in means.iter().enumerate() {
        if let Some(m) = m {
            if keep(&g.position(idx)[..d]) {
                best = Some(best.map_or(*m, |b: T| b.max(*m)));
            }
        }
    }
    best.map(|b| b.powf(T::one() / p)).ok_or_else(|| Error::arg("no admissible window center"))
}
