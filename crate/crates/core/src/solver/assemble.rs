//! Discretization of `−div(A∇u) + λu` on staggered grids.
//!
//! Unknowns live at nodes, gradients on edges. The edge flux for the `i`-edge at
//! `p` is `a_ii(mid) ∇_i u + ¼ Σ a_ij(c) ∇_j u` over the four `j`-edges touching the
//! `i`-edge, with `c` halfway between the two edge midpoints. The same point is used
//! from either side, so the edge operator for `A*` is the transpose of the one for `A`.

use rayon::prelude::*;

use super::csr::CsrMatrix;
use crate::coeff::TensorField;
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, DiscreteField, Grid, Location};
use crate::scalar::Real;

/// `(j, q, point, weight)`: the `j`-edge at node `q`, evaluated at `point`, scaled by `weight`.
type Coupling<T> = (usize, usize, [T; 3], T);

fn couplings<T: Real>(g: &Grid<T>, p: usize, i: usize) -> Vec<Coupling<T>> {
    let d = g.dim();
    let h = g.h();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let base = g.position(p);
    let at = |off: [T; 3]| {
        let mut x = base;
        for k in 0..d {
            x[k] = x[k] + h * off[k];
        }
        x
    };
    let mut out = Vec::with_capacity(1 + 4 * (d - 1));
    let mut mid = [T::zero(); 3];
    mid[i] = half;
    out.push((i, p, at(mid), T::one()));
    let far = match g.neighbor(p, i, 1) {
        Some(q) => q,
        None => return out,
    };
    for j in (0..d).filter(|&j| j != i) {
        // j-edges at p, p+e_i, p−e_j, p+e_i−e_j with offsets relative to p
        let cands = [
            (Some(p), 0.0, 0.0),
            (Some(far), 1.0, 0.0),
            (g.neighbor(p, j, -1), 0.0, -1.0),
            (g.neighbor(far, j, -1), 1.0, -1.0),
        ];
        for (q, di, dj) in cands {
            let Some(q) = q else { continue };
            if !g.has_edge(q, j) {
                continue;
            }
            let mut off = [T::zero(); 3];
            off[i] = (half + T::lit(di)) * half;
            off[j] = (T::lit(dj) + half) * half;
            out.push((j, q, at(off), quarter));
        }
    }
    out
}

/// `M·e` for an edge field `e`, evaluating the coefficients on the fly.
pub fn edge_flux<T: Real, F: TensorField<T> + ?Sized>(field: &F, e: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    let g = e.grid();
    let d = g.dim();
    let m = field.m();
    if e.location() != Location::Edge || e.components() != d * m {
        return Err(Error::RankMismatch { expected: d * m, found: e.components() });
    }
    let n = g.num_nodes();
    let side = d * m;
    let src = e.data();
    let mut out = DiscreteField::zeros(g, d * m, Location::Edge);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(comp, dst)| {
        let (i, alpha) = (comp / m, comp % m);
        let mut a = vec![T::zero(); side * side];
        for (p, slot) in dst.iter_mut().enumerate() {
            if !g.has_edge(p, i) {
                continue;
            }
            let mut acc = T::zero();
            for (j, q, x, w) in couplings(g, p, i) {
                field.eval_into(&x[..d], &mut a);
                for beta in 0..m {
                    let coef = a[(i * m + alpha) * side + j * m + beta];
                    acc = acc + w * coef * src[(j * m + beta) * n + q];
                }
            }
            *slot = acc;
        }
    });
    Ok(out)
}

/// `−div(A∇u) + λu` by composing the grid operators.
pub fn apply_composed<T: Real, F: TensorField<T> + ?Sized>(
    field: &F,
    lambda: T,
    u: &DiscreteField<T>,
) -> Result<DiscreteField<T>> {
    let flux = edge_flux(field, &gradient(u)?)?;
    let div = divergence(&flux)?;
    div.zip_with(u, |a, b| lambda * b - a)
}

/// An assembled operator `−div(A∇·) + λ` on a grid.
#[derive(Clone, Debug)]
pub struct SparseOperator<T> {
    grid: Grid<T>,
    m: usize,
    lambda: T,
    symmetric: bool,
    full: CsrMatrix<T>,
    restricted: Option<CsrMatrix<T>>,
    unknowns: Vec<usize>,
    reference: T,
}

/// Assembles `Dᵀ M D + λI` and, on Dirichlet grids, its restriction to interior nodes.
pub fn assemble<T: Real, F: TensorField<T> + ?Sized>(
    field: &F,
    grid: &Grid<T>,
    lambda: T,
) -> Result<SparseOperator<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::NegativeLambda(lambda.as_f64()));
    }
    if field.dim() != grid.dim() {
        return Err(Error::RankMismatch { expected: grid.dim(), found: field.dim() });
    }
    field.certify()?;
    let d = grid.dim();
    let m = field.m();
    let n = grid.num_nodes();
    let side = d * m;
    let inv_h = T::one() / grid.h();

    let mut dtrip = Vec::with_capacity(2 * d * m * n);
    for i in 0..d {
        for p in 0..n {
            if !grid.has_edge(p, i) {
                continue;
            }
            let q = grid.neighbor(p, i, 1).expect("edge has a far node");
            for alpha in 0..m {
                let row = (i * m + alpha) * n + p;
                dtrip.push((row, alpha * n + p, -inv_h));
                dtrip.push((row, alpha * n + q, inv_h));
            }
        }
    }
    let dmat = CsrMatrix::from_triplets(d * m * n, m * n, dtrip);

    let mtrip: Vec<(usize, usize, T)> = (0..d * n)
        .into_par_iter()
        .with_min_len(512)
        .flat_map_iter(|e| {
            let (i, p) = (e / n, e % n);
            let mut local = Vec::new();
            if grid.has_edge(p, i) {
                let mut a = vec![T::zero(); side * side];
                for (j, q, x, w) in couplings(grid, p, i) {
                    field.eval_into(&x[..d], &mut a);
                    for alpha in 0..m {
                        for beta in 0..m {
                            let v = w * a[(i * m + alpha) * side + j * m + beta];
                            if v != T::zero() {
                                local.push(((i * m + alpha) * n + p, (j * m + beta) * n + q, v));
                            }
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mmat = CsrMatrix::from_triplets(d * m * n, d * m * n, mtrip);
    let stiff = dmat.transpose().matmul(&mmat.matmul(&dmat));
    let full = stiff.add(&CsrMatrix::identity(m * n, lambda));

    let unknowns: Vec<usize> = (0..n).filter(|&p| grid.is_periodic() || !grid.is_boundary_node(p)).collect();
    let restricted = (!grid.is_periodic()).then(|| {
        let idx: Vec<usize> = (0..m).flat_map(|a| unknowns.iter().map(move |&p| a * n + p)).collect();
        full.restrict(&idx, &idx)
    });
    let matrix = restricted.as_ref().unwrap_or(&full);
    let diag = matrix.diagonal();
    let mean_diag = diag.iter().copied().sum::<T>() / T::from_count(diag.len().max(1));
    let reference = (mean_diag - lambda) * grid.h() * grid.h() / T::from_count(2 * d);
    Ok(SparseOperator {
        grid: grid.clone(),
        m,
        lambda,
        symmetric: field.is_symmetric(),
        full,
        restricted,
        unknowns,
        reference,
    })
}

impl<T: Real> SparseOperator<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// The system matrix on the unknowns.
    pub fn matrix(&self) -> &CsrMatrix<T> {
        self.restricted.as_ref().unwrap_or(&self.full)
    }

    /// The operator on every node, boundary rows included.
    pub fn full_matrix(&self) -> &CsrMatrix<T> {
        &self.full
    }

    /// Node indices carrying unknowns (all nodes on periodic grids, interior otherwise).
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn num_unknowns(&self) -> usize {
        self.m * self.unknowns.len()
    }

    /// Scalar `ā` such that `−āΔ_h + λ` has the same mean diagonal.
    pub fn reference_coefficient(&self) -> T {
        self.reference
    }

    pub fn apply(&self, x: &[T], y: &mut [T]) {
        self.matrix().matvec(x, y)
    }

    /// Gathers the unknown entries of a node field.
    pub fn gather(&self, u: &DiscreteField<T>) -> Vec<T> {
        let n = self.grid.num_nodes();
        (0..self.m).flat_map(|a| self.unknowns.iter().map(move |&p| u.data()[a * n + p])).collect()
    }

    /// Scatters unknowns into a node field that is zero elsewhere.
    pub fn scatter(&self, x: &[T]) -> DiscreteField<T> {
        let n = self.grid.num_nodes();
        let nu = self.unknowns.len();
        let mut out = DiscreteField::zeros(&self.grid, self.m, Location::Node);
        let data = out.data_mut();
        for a in 0..self.m {
            for (k, &p) in self.unknowns.iter().enumerate() {
                data[a * n + p] = x[a * nu + k];
            }
        }
        out
    }
}
