//! Small dense square matrices indexed by the flattened pair `(i, α)`.
//!
//! A fourth-order coefficient tensor `a_{ij}^{αβ}` is stored as an
//! `(d·m) × (d·m)` row-major matrix with row `i·m + α` and column `j·m + β`.

use nalgebra::{DMatrix, SymmetricEigen};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;

/// Row-major square matrix with side `d·m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    side: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(side: usize) -> Self {
        Self { side, data: vec![T::zero(); side * side] }
    }

    pub fn identity(side: usize) -> Self {
        let mut t = Self::zeros(side);
        for r in 0..side {
            t.data[r * side + r] = T::one();
        }
        t
    }

    pub fn scaled_identity(side: usize, s: T) -> Self {
        let mut t = Self::identity(side);
        t.data.iter_mut().for_each(|v| *v = *v * s);
        t
    }

    pub fn from_vec(side: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), side * side, "tensor data length");
        Self { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.side + col] = v;
    }

    /// Entry `a_{ij}^{αβ}` for system size `m`.
    #[inline]
    pub fn entry(&self, m: usize, i: usize, alpha: usize, j: usize, beta: usize) -> T {
        self.get(i * m + alpha, j * m + beta)
    }

    pub fn transpose(&self) -> Self {
        let n = self.side;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c];
            }
        }
        out
    }

    pub fn sym_part(&self) -> Self {
        let t = self.transpose();
        let half = T::lit(0.5);
        Self::from_vec(self.side, self.data.iter().zip(&t.data).map(|(&a, &b)| half * (a + b)).collect())
    }

    pub fn skew_part(&self) -> Self {
        let t = self.transpose();
        let half = T::lit(0.5);
        Self::from_vec(self.side, self.data.iter().zip(&t.data).map(|(&a, &b)| half * (a - b)).collect())
    }

    pub fn frobenius(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max(num_traits::Float::abs(a - b)))
    }

    fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.side, self.side, self.data.iter().map(|v| v.as_f64()))
    }

    /// Extreme eigenvalues of the symmetric part, in `f64`.
    pub fn sym_eig_range(&self) -> (f64, f64) {
        let m = self.sym_part().to_na();
        let eig = SymmetricEigen::new(m);
        let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Operator 2-norm (largest singular value), in `f64`.
    pub fn spectral_norm(&self) -> f64 {
        let m = self.to_na();
        let gram = m.transpose() * &m;
        let eig = SymmetricEigen::new(gram);
        eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.max_abs_diff(&self.transpose()) <= tol
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor { side: self.side, data: self.data.iter().map(|v| v.as_f64()).collect() }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { side: self.side, data: self.data.iter().map(|v| U::lit(v.as_f64())).collect() }
    }

    /// `self + s·other`
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[T], out: &mut [T]) {
        let n = self.side;
        for r in 0..n {
            out[r] = (0..n).map(|c| self.data[r * n + c] * v[c]).sum();
        }
    }
}

/// Serialized as nested rows.
impl<T: Real> Serialize for Tensor<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> =
            self.data.chunks(self.side.max(1)).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Tensor<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let side = rows.len();
        if rows.iter().any(|r| r.len() != side) {
            return Err(serde::de::Error::custom("tensor rows must form a square matrix"));
        }
        Ok(Self { side, data: rows.into_iter().flatten().map(T::lit).collect() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_range_of_diagonal() {
        let t = Tensor::from_vec(2, vec![2.0, 0.0, 0.0, 5.0]);
        let (lo, hi) = t.sym_eig_range();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let (s, c) = 0.3f64.sin_cos();
        let t = Tensor::from_vec(2, vec![c, -s, s, c]);
        assert!((t.spectral_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_plus_skew_recovers() {
        let t = Tensor::from_vec(2, vec![1.0, 2.0, 0.0, 1.0]);
        let mut s = t.sym_part();
        s.axpy(1.0, &t.skew_part());
        assert_eq!(s, t);
    }
}
