//! Preconditioned conjugate gradients and BiCGStab.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::assemble::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::fft::{discrete_laplacian_symbol, CubeDst, CubeFft};
use crate::grid::{DiscreteField, Location};
use crate::scalar::{dot, norm2, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    #[serde(rename = "PCG")]
    Pcg,
    #[serde(rename = "BiCGStab")]
    BiCgStab,
    #[serde(rename = "FFT")]
    Fft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    /// Seconds.
    pub wall_time: f64,
    pub method: SolveMethod,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    Jacobi,
    /// Exact inverse of `−āΔ_h + λ` by FFT (periodic) or DST (Dirichlet).
    #[default]
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, preconditioner: Preconditioner::Spectral }
    }
}

enum Precond<T: Real> {
    Jacobi(Vec<T>),
    Fft { fft: CubeFft<T>, symbol: Vec<T>, chunk: usize },
    Dst { dst: CubeDst<T>, symbol: Vec<T>, chunk: usize },
}

impl<T: Real> Precond<T> {
    fn build(op: &SparseOperator<T>, kind: Preconditioner) -> Self {
        let g = op.grid();
        let d = g.dim();
        let lambda = op.lambda();
        let abar = op.reference_coefficient();
        match kind {
            Preconditioner::Jacobi => Precond::Jacobi(
                op.matrix()
                    .diagonal()
                    .into_iter()
                    .map(|v| if v != T::zero() { T::one() / v } else { T::one() })
                    .collect(),
            ),
            Preconditioner::Spectral if g.is_periodic() => {
                let n = g.n();
                let fft = CubeFft::new(d, n);
                let symbol = (0..fft.len())
                    .map(|idx| {
                        let k = crate::grid::fft::signed_wavenumbers(idx, d, n);
                        let s = abar * discrete_laplacian_symbol(&k[..d], n, g.h()) + lambda;
                        if s > T::zero() {
                            T::one() / s
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                Precond::Fft { fft, symbol, chunk: op.unknowns().len() }
            }
            Preconditioner::Spectral => {
                let interior = g.n() - 1;
                let dst = CubeDst::new(d, interior);
                let h = g.h();
                let one_d: Vec<T> = (1..=interior)
                    .map(|k| {
                        let s = (T::PI() * T::from_count(k) / T::from_count(2 * g.n())).sin();
                        T::lit(4.0) * s * s / (h * h)
                    })
                    .collect();
                let total = interior.pow(d as u32);
                let symbol = (0..total)
                    .map(|mut idx| {
                        let mut s = T::zero();
                        for _ in 0..d {
                            s = s + one_d[idx % interior];
                            idx /= interior;
                        }
                        T::one() / (abar * s + lambda)
                    })
                    .collect();
                Precond::Dst { dst, symbol, chunk: total }
            }
        }
    }

    fn apply(&self, r: &[T], z: &mut [T]) {
        match self {
            Precond::Jacobi(inv) => {
                for ((zi, &ri), &w) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * w;
                }
            }
            Precond::Fft { fft, symbol, chunk } => {
                for (rc, zc) in r.chunks(*chunk).zip(z.chunks_mut(*chunk)) {
                    let mut buf: Vec<rustfft::num_complex::Complex<T>> =
                        rc.iter().map(|&v| rustfft::num_complex::Complex::new(v, T::zero())).collect();
                    fft.forward(&mut buf);
                    for (b, &s) in buf.iter_mut().zip(symbol) {
                        *b = *b * s;
                    }
                    fft.inverse(&mut buf);
                    for (zi, b) in zc.iter_mut().zip(&buf) {
                        *zi = b.re;
                    }
                }
            }
            Precond::Dst { dst, symbol, chunk } => {
                for (rc, zc) in r.chunks(*chunk).zip(z.chunks_mut(*chunk)) {
                    zc.copy_from_slice(rc);
                    dst.transform(zc);
                    for (v, &s) in zc.iter_mut().zip(symbol) {
                        *v = *v * s;
                    }
                    dst.inverse(zc);
                }
            }
        }
    }
}

/// Subtracts the per-component mean (the null space of periodic operators with `λ = 0`).
fn remove_means<T: Real>(x: &mut [T], chunk: usize) {
    for c in x.chunks_mut(chunk) {
        let mean = c.iter().copied().sum::<T>() / T::from_count(c.len());
        for v in c.iter_mut() {
            *v = *v - mean;
        }
    }
}

fn residual<T: Real>(op: &SparseOperator<T>, b: &[T], x: &[T], r: &mut [T]) {
    op.apply(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves `op·u = rhs` on the unknowns of `op`. The rhs is read at the unknown
/// nodes; the solution vanishes on Dirichlet boundary nodes. PCG is used for
/// symmetric operators, BiCGStab otherwise.
pub fn solve_krylov<T: Real>(
    op: &SparseOperator<T>,
    rhs: &DiscreteField<T>,
    opts: &SolveOptions,
) -> Result<(DiscreteField<T>, SolveReport)> {
    if rhs.location() != Location::Node || rhs.components() != op.m() || rhs.grid() != op.grid() {
        return Err(Error::RankMismatch { expected: op.m(), found: rhs.components() });
    }
    let b = op.gather(rhs);
    let (x, report) = solve_vector(op, &b, None, opts)?;
    Ok((op.scatter(&x), report))
}

/// Vector-level solve with an optional initial guess.
pub fn solve_vector<T: Real>(
    op: &SparseOperator<T>,
    b: &[T],
    guess: Option<&[T]>,
    opts: &SolveOptions,
) -> Result<(Vec<T>, SolveReport)> {
    let start = Instant::now();
    let method = if op.is_symmetric() { SolveMethod::Pcg } else { SolveMethod::BiCgStab };
    let chunk = op.unknowns().len();
    let singular = op.grid().is_periodic() && op.lambda() == T::zero();
    let mut b = b.to_vec();
    if singular {
        for c in b.chunks(chunk) {
            let s = c.iter().copied().sum::<T>().as_f64();
            let scale: f64 = c.iter().map(|v| v.as_f64().abs()).sum();
            if s.abs() > 1e-9 * scale + f64::MIN_POSITIVE {
                return Err(Error::SingularSystem(format!(
                    "lambda = 0 on a periodic grid needs a mean-zero rhs (sum {s:.3e})"
                )));
            }
        }
        remove_means(&mut b, chunk);
    }
    let bnorm = norm2(&b);
    let n = b.len();
    let mut x = guess.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
    if bnorm == T::zero() && guess.is_none() {
        let report = SolveReport {
            iterations: 0,
            final_relative_residual: 0.0,
            wall_time: start.elapsed().as_secs_f64(),
            method,
        };
        return Ok((x, report));
    }
    let pre = Precond::build(op, opts.preconditioner);
    let tol = T::lit(opts.tol);
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    // restart until the true residual meets the tolerance
    for _ in 0..8 {
        let used = match method {
            SolveMethod::Pcg => pcg(op, &pre, &b, &mut x, tol * bnorm, opts.max_iter - iterations),
            _ => bicgstab(op, &pre, &b, &mut x, tol * bnorm, opts.max_iter - iterations),
        };
        iterations += used;
        if singular {
            remove_means(&mut x, chunk);
        }
        let mut r = vec![T::zero(); n];
        residual(op, &b, &x, &mut r);
        rel = if bnorm > T::zero() { (norm2(&r) / bnorm).as_f64() } else { norm2(&r).as_f64() };
        if rel <= opts.tol || iterations >= opts.max_iter || !rel.is_finite() {
            break;
        }
    }
    if !(rel <= opts.tol) {
        return Err(Error::NotConverged { iterations, residual: rel });
    }
    let report =
        SolveReport { iterations, final_relative_residual: rel, wall_time: start.elapsed().as_secs_f64(), method };
    Ok((x, report))
}

fn pcg<T: Real>(op: &SparseOperator<T>, pre: &Precond<T>, b: &[T], x: &mut [T], atol: T, max_iter: usize) -> usize {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    residual(op, b, x, &mut r);
    if norm2(&r) <= atol {
        return 0;
    }
    let mut z = vec![T::zero(); n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return it;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        if norm2(&r) <= atol {
            return it;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    max_iter
}

fn bicgstab<T: Real>(
    op: &SparseOperator<T>,
    pre: &Precond<T>,
    b: &[T],
    x: &mut [T],
    atol: T,
    max_iter: usize,
) -> usize {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    residual(op, b, x, &mut r);
    if norm2(&r) <= atol {
        return 0;
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut p_hat = vec![T::zero(); n];
    let mut s_hat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() || omega == T::zero() {
            return it;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut p_hat);
        op.apply(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == T::zero() {
            return it;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= atol {
            for i in 0..n {
                x[i] = x[i] + alpha * p_hat[i];
            }
            return it;
        }
        pre.apply(&s, &mut s_hat);
        op.apply(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > T::zero() { dot(&t, &s) / tt } else { T::zero() };
        for i in 0..n {
            x[i] = x[i] + alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= atol {
            return it;
        }
    }
    max_iter
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{CoefficientField, ConstantTensor};
    use crate::grid::Grid;
    use crate::solver::assemble;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn laplace(dim: usize) -> ConstantTensor<f64> {
        ConstantTensor { dim, m: 1, value: Tensor::identity(dim) }
    }

    fn random(g: &Grid<f64>, seed: u64) -> DiscreteField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DiscreteField::from_data(g, 1, Location::Node, data).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::<f64>::periodic(2, 8, 1.0).unwrap();
        let op = assemble(&laplace(2), &g, 1.0).unwrap();
        let (u, rep) =
            solve_krylov(&op, &DiscreteField::zeros(&g, 1, Location::Node), &SolveOptions::default()).unwrap();
        assert!(u.data().iter().all(|&v| v == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn cosine_eigenfunction() {
        let g = Grid::<f64>::periodic(1, 64, 1.0).unwrap();
        let op = assemble(&laplace(1), &g, 1.0).unwrap();
        let f = DiscreteField::from_fn(&g, |x| (TAU * x[0]).cos());
        let sigma = discrete_laplacian_symbol(&[1], 64, g.h());
        for pre in [Preconditioner::Jacobi, Preconditioner::Spectral] {
            let opts = SolveOptions { preconditioner: pre, ..Default::default() };
            let (u, rep) = solve_krylov(&op, &f, &opts).unwrap();
            assert!(rep.final_relative_residual <= 1e-10);
            for (a, b) in u.data().iter().zip(f.data()) {
                assert!((a - b / (sigma + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn residual_oracle_nonsymmetric_and_dirichlet() {
        let f = CoefficientField::<f64>::from_json_str(
            r#"{"dim":2,"mu":0.25,"const":[[2.0,0.4],[-0.3,1.5]],
                "modes":[{"omega":[6.283185307179586,6.283185307179586],"cos":[[0.4,0.1],[0.0,0.3]],"sin":[[0.0,0.0],[0.1,0.0]]}]}"#,
        )
        .unwrap();
        for g in [Grid::<f64>::periodic(2, 32, 1.0).unwrap(), Grid::<f64>::unit_dirichlet(2, 32).unwrap()] {
            let op = assemble(&f, &g, 0.05).unwrap();
            for pre in [Preconditioner::Jacobi, Preconditioner::Spectral] {
                let rhs = random(&g, 5);
                let opts = SolveOptions { preconditioner: pre, ..Default::default() };
                let (u, rep) = solve_krylov(&op, &rhs, &opts).unwrap();
                assert_eq!(rep.method, SolveMethod::BiCgStab);
                let b = op.gather(&rhs);
                let ax = op.matrix().mul_vec(&op.gather(&u));
                let r: f64 = ax.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                assert!(r <= 1e-10 * norm2(&b) * 1.0001);
            }
        }
    }

    #[test]
    fn spectral_beats_jacobi() {
        let f =
            CoefficientField::<f64>::scalar_isotropic(2, 2.0, &[(vec![TAU, 0.0], 1.0, 0.0)], 1.0 / 3.0, None).unwrap();
        let g = Grid::<f64>::periodic(2, 64, 1.0).unwrap();
        let op = assemble(&f, &g, 1e-3).unwrap();
        let rhs = random(&g, 1);
        let it = |p| {
            solve_krylov(&op, &rhs, &SolveOptions { preconditioner: p, ..Default::default() }).unwrap().1.iterations
        };
        assert!(it(Preconditioner::Spectral) < it(Preconditioner::Jacobi));
    }

    #[test]
    fn singular_periodic_gauge() {
        let g = Grid::<f64>::periodic(2, 16, 1.0).unwrap();
        let op = assemble(&laplace(2), &g, 0.0).unwrap();
        let f = DiscreteField::from_fn(&g, |x| (TAU * x[0]).sin() * (TAU * x[1]).cos());
        let (u, _) = solve_krylov(&op, &f, &SolveOptions::default()).unwrap();
        let mean: f64 = u.data().iter().sum::<f64>() / 256.0;
        assert!(mean.abs() < 1e-14);
        let bad = DiscreteField::from_fn(&g, |_| 1.0);
        assert!(matches!(solve_krylov(&op, &bad, &SolveOptions::default()), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn budget_exhaustion_reports() {
        let g = Grid::<f64>::periodic(2, 32, 1.0).unwrap();
        let op = assemble(&laplace(2), &g, 1e-4).unwrap();
        let opts = SolveOptions { max_iter: 2, preconditioner: Preconditioner::Jacobi, ..Default::default() };
        assert!(matches!(solve_krylov(&op, &random(&g, 2), &opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn maximum_principle() {
        let f = CoefficientField::<f64>::scalar_isotropic(2, 2.0, &[(vec![TAU, TAU], 0.8, 0.5)], 0.2, None).unwrap();
        let g = Grid::<f64>::unit_dirichlet(2, 32).unwrap();
        let op = assemble(&f, &g, 0.0).unwrap();
        // boundary data 1 + x·y in [1, 2], lifted into the rhs
        let data = DiscreteField::from_fn(&g, |x| 1.0 + x[0] * x[1]);
        let bnd = data.zip_with(&data, |v, _| v).unwrap();
        let mut lift = bnd.clone();
        for p in 0..g.num_nodes() {
            if !g.is_boundary_node(p) {
                lift.data_mut()[p] = 0.0;
            }
        }
        let k_lift = op.full_matrix().mul_vec(lift.data());
        let rhs = DiscreteField::from_data(&g, 1, Location::Node, k_lift.iter().map(|v| -v).collect()).unwrap();
        let (u, _) = solve_krylov(&op, &rhs, &SolveOptions::default()).unwrap();
        let full = u.add(&lift).unwrap();
        assert!(full.data().iter().all(|&v| (1.0 - 1e-9..=2.0 + 1e-9).contains(&v)));
    }
}
