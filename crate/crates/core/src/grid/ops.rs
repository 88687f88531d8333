use rayon::prelude::*;

use super::{DiscreteField, Grid, Location};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn require(u: &DiscreteField<impl Real>, loc: Location) -> Result<()> {
    if u.location() != loc {
        return Err(Error::arg(format!("expected a {loc:?}-located field")));
    }
    Ok(())
}

/// Forward differences on edges: `(∇u)_{i,a}(p) = (u_a(p + e_i) − u_a(p)) / h`.
pub fn gradient<T: Real>(u: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    require(u, Location::Node)?;
    let g = u.grid();
    let (d, c, n) = (g.dim(), u.components(), g.num_nodes());
    let inv_h = T::one() / g.h();
    let mut out = DiscreteField::zeros(g, d * c, Location::Edge);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(comp, chunk)| {
        let (axis, a) = (comp / c, comp % c);
        let src = u.component(a);
        for (idx, slot) in chunk.iter_mut().enumerate() {
            if let Some(nb) = g.neighbor(idx, axis, 1) {
                *slot = (src[nb] - src[idx]) * inv_h;
            }
        }
    });
    Ok(out)
}

/// Backward-difference divergence of an edge field, the negative adjoint of [`gradient`].
pub fn divergence<T: Real>(f: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    require(f, Location::Edge)?;
    let g = f.grid();
    let d = g.dim();
    if !f.components().is_multiple_of(d) {
        return Err(Error::RankMismatch { expected: d, found: f.components() });
    }
    let c = f.components() / d;
    let n = g.num_nodes();
    let inv_h = T::one() / g.h();
    let mut out = DiscreteField::zeros(g, c, Location::Node);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(a, chunk)| {
        for (idx, slot) in chunk.iter_mut().enumerate() {
            let mut acc = T::zero();
            for axis in 0..d {
                let src = f.component(axis * c + a);
                if g.has_edge(idx, axis) {
                    acc = acc + src[idx];
                }
                if let Some(nb) = g.neighbor(idx, axis, -1) {
                    acc = acc - src[nb];
                }
            }
            *slot = acc * inv_h;
        }
    });
    Ok(out)
}

/// Node-to-node derivative along `axis`: centered in the interior, one-sided on
/// Dirichlet boundary faces.
pub fn centered_derivative<T: Real>(u: &DiscreteField<T>, axis: usize) -> Result<DiscreteField<T>> {
    require(u, Location::Node)?;
    let g = u.grid();
    if axis >= g.dim() {
        return Err(Error::arg("axis out of range"));
    }
    let n = g.num_nodes();
    let h = g.h();
    let mut out = DiscreteField::zeros(g, u.components(), Location::Node);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(a, chunk)| {
        let src = u.component(a);
        for (idx, slot) in chunk.iter_mut().enumerate() {
            *slot = match (g.neighbor(idx, axis, 1), g.neighbor(idx, axis, -1)) {
                (Some(p), Some(m)) => (src[p] - src[m]) / (h + h),
                (Some(p), None) => (src[p] - src[idx]) / h,
                (None, Some(m)) => (src[idx] - src[m]) / h,
                (None, None) => T::zero(),
            };
        }
    });
    Ok(out)
}

/// Averages each edge component onto nodes: `½(F_i(p) + F_i(p − e_i))`.
pub fn edge_to_node<T: Real>(f: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    require(f, Location::Edge)?;
    let g = f.grid();
    let d = g.dim();
    let c = f.components() / d;
    let n = g.num_nodes();
    let half = T::lit(0.5);
    let mut out = DiscreteField::zeros(g, d * c, Location::Node);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(comp, chunk)| {
        let axis = comp / c;
        let src = f.component(comp);
        for (idx, slot) in chunk.iter_mut().enumerate() {
            let fwd = if g.has_edge(idx, axis) { Some(src[idx]) } else { None };
            let bwd = g.neighbor(idx, axis, -1).map(|m| src[m]);
            *slot = match (fwd, bwd) {
                (Some(a), Some(b)) => half * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => T::zero(),
            };
        }
    });
    Ok(out)
}

/// Periodic shift by whole nodes: `out(p) = u(p + shift)`.
pub fn roll<T: Real>(u: &DiscreteField<T>, shift: &[isize]) -> Result<DiscreteField<T>> {
    let g = u.grid();
    if !g.is_periodic() {
        return Err(Error::arg("roll requires a periodic grid"));
    }
    let n = g.num_nodes();
    let mut out = u.clone();
    let src_of = shifted_index_map(g, shift);
    for c in 0..u.components() {
        let src = u.component(c);
        let dst = out.component_mut(c);
        for idx in 0..n {
            dst[idx] = src[src_of(idx)];
        }
    }
    Ok(out)
}

/// Returns `idx ↦ index of (p + shift)` on a periodic grid.
pub(crate) fn shifted_index_map<'a, T: Real>(g: &'a Grid<T>, shift: &'a [isize]) -> impl Fn(usize) -> usize + 'a {
    let s = g.nodes_per_side() as isize;
    let shift: Vec<isize> = shift.iter().map(|v| v.rem_euclid(s)).collect();
    move |idx| {
        let p = g.multi_index(idx);
        let mut q = [0usize; 3];
        for k in 0..g.dim() {
            q[k] = ((p[k] as isize + shift[k]) % s) as usize;
        }
        g.linear_index(&q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_field(g: &Grid<f64>, c: usize, loc: Location, seed: u64) -> DiscreteField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DiscreteField::from_data(g, c, loc, data).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::<f64>::periodic(2, 8, 2.0).unwrap();
        let u = DiscreteField::from_fn(&g, |_| 3.5);
        assert!(gradient(&u).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_exact_for_affine_on_dirichlet() {
        let g = Grid::<f64>::unit_dirichlet(2, 8).unwrap();
        let u = DiscreteField::from_fn(&g, |x| 2.0 * x[1] - 0.5);
        let gu = gradient(&u).unwrap();
        for idx in 0..g.num_nodes() {
            if g.has_edge(idx, 1) {
                assert!((gu.component(1)[idx] - 2.0).abs() < 1e-13);
            }
            if g.has_edge(idx, 0) {
                assert!(gu.component(0)[idx].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradient_second_order_at_midpoints() {
        let err = |n: usize| {
            let g = Grid::<f64>::periodic(1, n, 1.0).unwrap();
            let u = DiscreteField::from_fn(&g, |x| (TAU * x[0]).sin());
            let gu = gradient(&u).unwrap();
            (0..n)
                .map(|i| {
                    let xm = g.edge_midpoint(i, 0)[0];
                    (gu.data()[i] - TAU * (TAU * xm).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn summation_by_parts() {
        for dim in 1..=2 {
            let g = Grid::<f64>::periodic(dim, 16, 3.0).unwrap();
            let u = random_field(&g, 2, Location::Node, 1);
            let f = random_field(&g, 2 * dim, Location::Edge, 2);
            let lhs = divergence(&f).unwrap().inner(&u);
            let rhs = f.inner(&gradient(&u).unwrap());
            let rel = (lhs + rhs).abs() / rhs.abs().max(1e-300);
            assert!(rel <= 1e-13, "dim {dim}: rel {rel}");
        }
    }

    #[test]
    fn divergence_of_gradient_of_sine() {
        let err = |n: usize| {
            let g = Grid::<f64>::periodic(1, n, 1.0).unwrap();
            let u = DiscreteField::from_fn(&g, |x| (TAU * x[0]).sin());
            let lap = divergence(&gradient(&u).unwrap()).unwrap();
            (0..n)
                .map(|i| {
                    let x = g.position(i)[0];
                    (lap.data()[i] + TAU * TAU * (TAU * x).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn roll_matches_shift() {
        let g = Grid::<f64>::periodic(1, 8, 1.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| x[0]);
        let r = roll(&u, &[3]).unwrap();
        assert_eq!(r.data()[0], u.data()[3]);
        assert_eq!(r.data()[6], u.data()[1]);
    }
}
