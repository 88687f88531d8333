//! Multi-dimensional FFT and DST-I helpers over cubic node arrays.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward and inverse 1-D plans of one length, applied along every axis.
pub struct CubeFft<T: Real> {
    dim: usize,
    side: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> CubeFft<T> {
    pub fn new(dim: usize, side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { dim, side, forward: planner.plan_fft_forward(side), inverse: planner.plan_fft_inverse(side) }
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let s = self.side;
        let total = data.len();
        for axis in 0..self.dim {
            let stride = s.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(s * 64).for_each(|chunk| fft.process(chunk));
                continue;
            }
            let lines = total / s;
            let mut buf = vec![Complex::new(T::zero(), T::zero()); total];
            buf.par_chunks_mut(s).enumerate().for_each(|(l, line)| {
                let base = (l / stride) * stride * s + l % stride;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
            });
            buf.par_chunks_mut(s * 64).for_each(|chunk| fft.process(chunk));
            for l in 0..lines {
                let base = (l / stride) * stride * s + l % stride;
                for k in 0..s {
                    data[base + k * stride] = buf[l * s + k];
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.forward)
    }

    /// Inverse transform in place, normalized by `1/N`.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.inverse);
        let scale = T::one() / T::from_count(data.len());
        data.par_iter_mut().for_each(|v| *v = *v * scale);
    }

    /// Applies a real Fourier multiplier `symbol(k)` to a real array, where `k`
    /// holds the signed wavenumbers in `(−side/2, side/2]`.
    pub fn apply_multiplier(&self, u: &[T], symbol: impl Fn(&[isize]) -> T + Sync) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = u.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        let (d, s) = (self.dim, self.side);
        buf.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let k = signed_wavenumbers(idx, d, s);
            *v = *v * symbol(&k[..d]);
        });
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Signed integer wavenumbers of a linear FFT index.
pub fn signed_wavenumbers(mut idx: usize, dim: usize, side: usize) -> [isize; 3] {
    let mut k = [0isize; 3];
    for a in (0..dim).rev() {
        let v = idx % side;
        idx /= side;
        k[a] = if v <= side / 2 { v as isize } else { v as isize - side as isize };
    }
    k
}

/// Symbol of the compact (2d+1)-point negative Laplacian on a periodic grid.
pub fn discrete_laplacian_symbol<T: Real>(k: &[isize], n: usize, h: T) -> T {
    let four_over_h2 = T::lit(4.0) / (h * h);
    k.iter()
        .map(|&ki| {
            let s = (T::PI() * T::lit(ki as f64) / T::from_count(n)).sin();
            four_over_h2 * s * s
        })
        .sum()
}

/// DST-I applied along every axis of an `(interior)^dim` array, unnormalized:
/// `X_k = Σ_j x_j sin(π j k / (N + 1))`, `j, k = 1..=N`.
pub struct CubeDst<T: Real> {
    dim: usize,
    interior: usize,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> CubeDst<T> {
    pub fn new(dim: usize, interior: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { dim, interior, fft: planner.plan_fft_forward(2 * (interior + 1)) }
    }

    fn line(&self, x: &mut [T], scratch: &mut [Complex<T>]) {
        let n = self.interior;
        let zero = Complex::new(T::zero(), T::zero());
        scratch.iter_mut().for_each(|v| *v = zero);
        for j in 0..n {
            scratch[j + 1] = Complex::new(x[j], T::zero());
            scratch[2 * (n + 1) - 1 - j] = Complex::new(-x[j], T::zero());
        }
        self.fft.process(scratch);
        let half = T::lit(-0.5);
        for k in 0..n {
            x[k] = half * scratch[k + 1].im;
        }
    }

    pub fn transform(&self, data: &mut [T]) {
        let s = self.interior;
        let total = data.len();
        let m = 2 * (s + 1);
        for axis in 0..self.dim {
            let stride = s.pow((self.dim - 1 - axis) as u32);
            let mut buf: Vec<T> = vec![T::zero(); total];
            buf.par_chunks_mut(s).enumerate().for_each(|(l, line)| {
                let base = (l / stride) * stride * s + l % stride;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
            });
            buf.par_chunks_mut(s).for_each_init(
                || vec![Complex::new(T::zero(), T::zero()); m],
                |scratch, line| self.line(line, scratch),
            );
            for l in 0..total / s {
                let base = (l / stride) * stride * s + l % stride;
                for k in 0..s {
                    data[base + k * stride] = buf[l * s + k];
                }
            }
        }
    }

    /// Inverse of [`transform`](Self::transform).
    pub fn inverse(&self, data: &mut [T]) {
        self.transform(data);
        let scale = (T::lit(2.0) / T::from_count(self.interior + 1)).powi(self.dim as i32);
        data.iter_mut().for_each(|v| *v = *v * scale);
    }
}
