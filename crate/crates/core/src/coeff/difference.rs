//! Finite differences `Δ_yz g(x) = g(x+y) − g(x+z)` and their compositions `Δ_P`.

use crate::error::{Error, Result};
use crate::grid::{roll, DiscreteField};
use crate::scalar::Real;

use super::TensorField;

/// The pairs `P = {(y_1,z_1), …, (y_k,z_k)}` of a k-fold difference.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceSpec<T> {
    pairs: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> DifferenceSpec<T> {
    pub fn new(pairs: Vec<(Vec<T>, Vec<T>)>) -> Result<Self> {
        let first = pairs.first().ok_or_else(|| Error::arg("difference order must be >= 1"))?;
        let d = first.0.len();
        for (y, z) in &pairs {
            if y.len() != d || z.len() != d {
                return Err(Error::arg("shift vectors must share one dimension"));
            }
            if y.iter().chain(z).any(|v| !v.is_finite()) {
                return Err(Error::arg("shift vectors must be finite"));
            }
        }
        Ok(Self { pairs })
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].0.len()
    }

    pub fn pairs(&self) -> &[(Vec<T>, Vec<T>)] {
        &self.pairs
    }

    /// The sub-spec `Q` selected by the bits of `mask` (bit `i` keeps pair `i`), or
    /// `None` for the empty set.
    pub fn subset(&self, mask: usize) -> Option<Self> {
        let pairs: Vec<_> =
            self.pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p.clone()).collect();
        (!pairs.is_empty()).then_some(Self { pairs })
    }
}

/// `Δ_P g(x)` for a vector-valued `g`, by recursion on the first pair.
pub fn difference<T: Real>(g: &(impl Fn(&[T]) -> Vec<T> + ?Sized), spec: &DifferenceSpec<T>, x: &[T]) -> Vec<T> {
    apply(g, spec.pairs(), x)
}

fn apply<T: Real>(g: &(impl Fn(&[T]) -> Vec<T> + ?Sized), pairs: &[(Vec<T>, Vec<T>)], x: &[T]) -> Vec<T> {
    match pairs.split_first() {
        None => g(x),
        Some(((y, z), rest)) => {
            let xy: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a + b).collect();
            let xz: Vec<T> = x.iter().zip(z).map(|(&a, &b)| a + b).collect();
            let a = apply(g, rest, &xy);
            let b = apply(g, rest, &xz);
            a.into_iter().zip(b).map(|(u, v)| u - v).collect()
        }
    }
}

/// `Δ_P g(x)` for a scalar `g`.
pub fn difference_scalar<T: Real>(g: impl Fn(&[T]) -> T, spec: &DifferenceSpec<T>, x: &[T]) -> T {
    difference(&|p: &[T]| vec![g(p)], spec, x)[0]
}

/// `Δ_P A(x)` for a coefficient field, row-major in `(i,α,j,β)`.
pub fn field_difference<T: Real, F: TensorField<T> + ?Sized>(field: &F, spec: &DifferenceSpec<T>, x: &[T]) -> Vec<T> {
    let side = field.dim() * field.m();
    difference(
        &|p: &[T]| {
            let mut out = vec![T::zero(); side * side];
            field.eval_into(p, &mut out);
            out
        },
        spec,
        x,
    )
}

/// `Δ_P u` on a periodic grid with shifts given in whole nodes.
pub fn grid_difference<T: Real>(u: &DiscreteField<T>, pairs: &[(Vec<isize>, Vec<isize>)]) -> Result<DiscreteField<T>> {
    match pairs.split_first() {
        None => Ok(u.clone()),
        Some(((y, z), rest)) => {
            let inner = grid_difference(u, rest)?;
            roll(&inner, y)?.sub(&roll(&inner, z)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spec1(y: f64, z: f64) -> DifferenceSpec<f64> {
        DifferenceSpec::new(vec![(vec![y], vec![z])]).unwrap()
    }

    #[test]
    fn identical_shifts_cancel() {
        let s = spec1(0.7, 0.7);
        assert_eq!(difference_scalar(|x: &[f64]| x[0].exp(), &s, &[0.3]), 0.0);
    }

    #[test]
    fn cosine_half_period() {
        let v = difference_scalar(|x: &[f64]| x[0].cos(), &spec1(PI, 0.0), &[0.0]);
        assert!((v + 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_difference_of_square() {
        let s = DifferenceSpec::new(vec![(vec![1.0], vec![0.0]), (vec![1.0], vec![0.0])]).unwrap();
        for x in [-3.0, 0.0, 0.25, 11.0] {
            let v = difference_scalar(|p: &[f64]| p[0] * p[0], &s, &[x]);
            assert!((v - 2.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn rejects_empty_and_mixed() {
        assert!(DifferenceSpec::<f64>::new(vec![]).is_err());
        assert!(DifferenceSpec::new(vec![(vec![1.0], vec![0.0, 1.0])]).is_err());
        assert!(DifferenceSpec::new(vec![(vec![f64::NAN], vec![0.0])]).is_err());
    }

    #[test]
    fn grid_difference_matches_pointwise() {
        let g = Grid::<f64>::periodic(1, 32, 1.0).unwrap();
        let f = |x: f64| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos();
        let u = DiscreteField::from_fn(&g, |x| f(x[0]));
        let pairs = vec![(vec![3isize], vec![-2isize]), (vec![5], vec![1])];
        let du = grid_difference(&u, &pairs).unwrap();
        let h = g.h();
        let spec = DifferenceSpec::new(vec![(vec![3.0 * h], vec![-2.0 * h]), (vec![5.0 * h], vec![h])]).unwrap();
        for i in 0..32 {
            let exact = difference_scalar(|p: &[f64]| f(p[0]), &spec, &[i as f64 * h]);
            assert!((du.data()[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = |p: &[f64]| (p[0] * 1.3).sin() * (p[1] * 0.7).cos() + p[0] * p[1];
        for _ in 0..20 {
            let mut v = || vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let (a, b, c, d) = (v(), v(), v(), v());
            let x = v();
            let s1 = DifferenceSpec::new(vec![(a.clone(), b.clone()), (c.clone(), d.clone())]).unwrap();
            let s2 = DifferenceSpec::new(vec![(c, d), (a, b)]).unwrap();
            let (u, w) = (difference_scalar(g, &s1, &x), difference_scalar(g, &s2, &x));
            assert!((u - w).abs() < 1e-12);
        }
    }
}
