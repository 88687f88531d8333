//! Smoothed two-scale expansion `w_ε = u_ε − u_0 − εχ_T(x/ε)K_{ε,δ}(∇u_0)` and its
//! `H¹` error against `δ^{1/2}`.

mod study;

use serde::{Deserialize, Serialize};

use crate::coeff::{ConstantTensor, Rescaled};
use crate::corrector::{CorrectorSet, DualCorrectorSet};
use crate::error::{Error, Result};
use crate::grid::{
    centered_derivative, cutoff, edge_to_node, gradient, h1_norm, l2_norm, mollify, windowed_norm, DiscreteField, Grid,
    Location,
};
use crate::scalar::Real;
use crate::solver::{assemble, solve_krylov, SolveOptions};
use crate::tensor::Tensor;

pub use study::{h1_error_study, TwoScaleOptions};

/// `K_{ε,δ}f = S_ε(η_δ f)`: cut off on the `δ`-collar, then mollify at scale `ε`.
pub fn k_smooth<T: Real>(f: &DiscreteField<T>, epsilon: f64, delta: f64) -> Result<DiscreteField<T>> {
    let g = f.grid();
    let h = g.h().as_f64();
    if !(delta >= 2.0 * epsilon * (1.0 - 1e-12)) {
        return Err(Error::arg(format!("collar width {delta} must be at least 2 eps = {}", 2.0 * epsilon)));
    }
    if !(epsilon >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::arg(format!("eps = {epsilon} must be at least two cells (h = {h})")));
    }
    let eta = cutoff(g, T::lit(delta))?;
    let mut cut = f.clone();
    let n = g.num_nodes();
    for c in 0..f.components() {
        for (v, &e) in cut.component_mut(c).iter_mut().zip(eta.data()) {
            *v = *v * e;
        }
    }
    debug_assert_eq!(cut.data().len(), n * f.components());
    mollify(&cut, T::lit(epsilon))
}

/// `x ↦ y = x/ε` on node indices: Ω-node `p` lands on cell node `offset + ratio·p`.
struct CellMap {
    ratio: usize,
    offset: [usize; 3],
    cells: usize,
}

impl CellMap {
    fn new<T: Real>(omega: &Grid<T>, cell: &Grid<T>, epsilon: f64) -> Result<Self> {
        if !cell.is_periodic() || cell.dim() != omega.dim() {
            return Err(Error::Incommensurate("corrector grid must be periodic with the same dimension".into()));
        }
        let hc = cell.h().as_f64() * epsilon;
        let r = omega.h().as_f64() / hc;
        let o = omega.origin().as_f64() / hc;
        let close = |v: f64| (v - v.round()).abs() < 1e-9 * v.abs().max(1.0);
        if !close(r) || r.round() < 1.0 || !close(o) {
            return Err(Error::Incommensurate(format!(
                "eps·h_cell = {hc} does not divide the domain spacing {} and origin",
                omega.h().as_f64()
            )));
        }
        let cells = cell.n();
        let off = (o.round() as i64).rem_euclid(cells as i64) as usize;
        Ok(Self { ratio: r.round() as usize, offset: [off; 3], cells })
    }

    fn index<T: Real>(&self, omega: &Grid<T>, cell: &Grid<T>, idx: usize) -> usize {
        let p = omega.multi_index(idx);
        let mut q = [0usize; 3];
        for k in 0..omega.dim() {
            q[k] = (self.offset[k] + self.ratio * p[k]) % self.cells;
        }
        cell.linear_index(&q)
    }
}

/// Inputs of [`build_expansion`]; `u_eps` and `u0` share a Dirichlet grid.
pub struct ExpansionInput<'a, T: Real> {
    pub epsilon: f64,
    pub delta: f64,
    pub u_eps: &'a DiscreteField<T>,
    pub u0: &'a DiscreteField<T>,
    pub correctors: &'a CorrectorSet<T>,
    pub dual: &'a DualCorrectorSet<T>,
    /// The tensor `u0` was solved with.
    pub a_hat: &'a Tensor<T>,
}

/// Norms of `w_ε` and of the three divergence-form residual terms of `L_ε(w_ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionReport {
    pub epsilon: f64,
    pub delta: f64,
    pub h1: f64,
    pub grad_l2: f64,
    /// `‖G_k‖_{L²}` with `L_ε(w_ε) = Σ_k div G_k`.
    pub terms: [f64; 3],
    /// `‖L_ε(w_ε)‖_{H⁻¹}` from a discrete Laplace solve.
    pub dual_norm: f64,
    /// `‖∇w_ε‖_{L²(Ω_{4δ})}`
    pub collar_grad_l2: f64,
}

impl ExpansionReport {
    pub fn term_sum(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Builds `w_ε` and evaluates the residual structure.
pub fn build_expansion<T: Real>(
    input: &ExpansionInput<'_, T>,
    opts: &SolveOptions,
) -> Result<(DiscreteField<T>, ExpansionReport)> {
    let ExpansionInput { epsilon, delta, u_eps, u0, correctors, dual, a_hat } = *input;
    let g = u_eps.grid();
    if u0.grid() != g || g.is_periodic() {
        return Err(Error::arg("u_eps and u0 must share a Dirichlet grid"));
    }
    let cell = correctors.grid();
    let map = CellMap::new(g, cell, epsilon)?;
    let (d, m) = (g.dim(), correctors.field().m());
    let side = d * m;
    let n = g.num_nodes();
    let e = T::lit(epsilon);
    let cidx: Vec<usize> = (0..n).map(|p| map.index(g, cell, p)).collect();

    // ∂_k u0^β and K(∂_k u0^β), component k·m+β
    let du0: Vec<DiscreteField<T>> = (0..d).map(|k| centered_derivative(u0, k)).collect::<Result<_>>()?;
    let mut grad_u0 = DiscreteField::zeros(g, side, Location::Node);
    for k in 0..d {
        for b in 0..m {
            grad_u0.component_mut(k * m + b).copy_from_slice(du0[k].component(b));
        }
    }
    let ku = k_smooth(&grad_u0, epsilon, delta)?;

    // χ(x/ε) with component (k·m+β)·m + α
    let chi_at = |col: usize, alpha: usize, p: usize| correctors.columns()[col].component(alpha)[cidx[p]];

    let mut w = u_eps.sub(u0)?;
    for alpha in 0..m {
        let dst = w.component_mut(alpha);
        for p in 0..n {
            let mut s = T::zero();
            for col in 0..side {
                s = s + chi_at(col, alpha, p) * ku.component(col)[p];
            }
            dst[p] = dst[p] - e * s;
        }
    }

    // ∂_j K(∂_k u0^γ), component j·side + (k·m+γ)
    let dku: Vec<DiscreteField<T>> = (0..d).map(|j| centered_derivative(&ku, j)).collect::<Result<_>>()?;
    let field = correctors.field();
    let mut g1 = DiscreteField::zeros(g, side, Location::Node);
    let mut g2 = g1.clone();
    let mut g3 = g1.clone();
    let mut a = vec![T::zero(); side * side];
    let mut y = vec![T::zero(); d];
    for p in 0..n {
        let x = g.position(p);
        for k in 0..d {
            y[k] = x[k] / e;
        }
        crate::coeff::TensorField::eval_into(field, &y, &mut a);
        for row in 0..side {
            let (mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero());
            for col in 0..side {
                let (j, beta) = (col / m, col % m);
                let arc = a[row * side + col];
                let kj = ku.component(col)[p];
                s1 = s1 + (a_hat.get(row, col) - arc) * (kj - grad_u0.component(col)[p]);
                s2 = s2 + dual.b.component(row * side + col)[cidx[p]] * kj;
                let mut inner = T::zero();
                for kc in 0..side {
                    inner = inner + chi_at(kc, beta, p) * dku[j].component(kc)[p];
                }
                s3 = s3 + arc * inner;
            }
            g1.component_mut(row)[p] = s1;
            g2.component_mut(row)[p] = s2;
            g3.component_mut(row)[p] = e * s3;
        }
    }
    let terms = [l2_norm(&g1).as_f64(), l2_norm(&g2).as_f64(), l2_norm(&g3).as_f64()];

    let h1 = h1_norm(&w)?.as_f64();
    let gw = gradient(&w)?;
    let grad_l2 = l2_norm(&gw).as_f64();
    let mag = edge_to_node(&gw)?.pointwise_magnitude();
    let collar: f64 = (0..n)
        .filter(|&p| g.boundary_distance(p).as_f64() < 4.0 * delta)
        .map(|p| g.node_weight(p).as_f64() * mag[p].as_f64().powi(2))
        .sum();

    // ‖L_ε w‖_{H⁻¹}: r = L_ε w on interior nodes, z = (−Δ_h)⁻¹ r, norm² = ⟨r, z⟩
    let op = assemble(&Rescaled::new(field, epsilon), g, T::zero())?;
    let mut r = vec![T::zero(); m * n];
    op.full_matrix().matvec(w.data(), &mut r);
    let r = w.with_data(r);
    let lap = assemble(&ConstantTensor { dim: d, m, value: Tensor::identity(side) }, g, T::zero())?;
    // a few digits suffice for a norm
    let loose = SolveOptions { tol: opts.tol.max(1e-8), ..*opts };
    let (z, _) = solve_krylov(&lap, &r, &loose)?;
    let mut dual_sq = 0.0;
    for a in 0..m {
        for &p in lap.unknowns() {
            dual_sq += g.node_weight(p).as_f64() * r.component(a)[p].as_f64() * z.component(a)[p].as_f64();
        }
    }

    let report = ExpansionReport {
        epsilon,
        delta,
        h1,
        grad_l2,
        terms,
        dual_norm: dual_sq.max(0.0).sqrt(),
        collar_grad_l2: collar.sqrt(),
    };
    Ok((w, report))
}

/// Terms of the collar width `δ = 2T⁻¹ + ‖∇χ_T − ψ‖_{B²} + T⁻¹‖χ_T‖_{S²₁} +
/// T⁻²‖φ_T‖_{S²₁} + T⁻¹‖∇φ_T‖_{S²₁}` with `ψ` a proxy on the same grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeltaTerms {
    pub base: f64,
    pub psi_gap: f64,
    pub chi: f64,
    pub phi: f64,
    pub grad_phi: f64,
    pub total: f64,
}

pub fn measure_delta<T: Real>(
    set: &CorrectorSet<T>,
    dual: &DualCorrectorSet<T>,
    psi: &DiscreteField<T>,
) -> Result<DeltaTerms> {
    let t = set.t();
    let two = T::lit(2.0);
    let one = T::one();
    let vol = set.grid().volume().as_f64();
    let base = 2.0 / t;
    let psi_gap = l2_norm(&set.grad_chi().sub(psi)?).as_f64() / vol.sqrt();
    let chi = set.chi_norm(1.0)?.as_f64() / t;
    let phi = windowed_norm(&dual.phi, two, one)?.as_f64() / (t * t);
    let grad_phi = windowed_norm(&gradient(&dual.phi)?, two, one)?.as_f64() / t;
    Ok(DeltaTerms { base, psi_gap, chi, phi, grad_phi, total: base + psi_gap + chi + phi + grad_phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k_smooth_of_one_and_zero() {
        let g = Grid::<f64>::unit_dirichlet(2, 128).unwrap();
        let (eps, delta) = (1.0 / 32.0, 1.0 / 16.0);
        let one = DiscreteField::from_fn(&g, |_| 1.0);
        let k = k_smooth(&one, eps, delta).unwrap();
        for p in 0..g.num_nodes() {
            let dist = g.boundary_distance(p);
            if dist < delta - eps {
                assert_eq!(k.data()[p], 0.0);
            }
            if dist > 2.0 * delta + eps + 1e-12 {
                assert!((k.data()[p] - 1.0).abs() < 1e-12);
            }
        }
        let zero = DiscreteField::zeros(&g, 1, Location::Node);
        assert!(k_smooth(&zero, eps, delta).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(k_smooth(&one, eps, 1.5 * eps).is_err());
        assert!(k_smooth(&one, 1.0 / 128.0, 0.1).is_err());
    }

    #[test]
    fn k_smooth_contracts_random_fields() {
        let g = Grid::<f64>::unit_dirichlet(2, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let data = (0..g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = DiscreteField::from_data(&g, 1, Location::Node, data).unwrap();
            let k = k_smooth(&f, 1.0 / 16.0, 1.0 / 8.0).unwrap();
            assert!(l2_norm(&k) <= l2_norm(&f));
        }
    }

    #[test]
    fn cell_map_requires_commensurate_grids() {
        let omega = Grid::<f64>::unit_dirichlet(1, 128).unwrap();
        let cell = Grid::<f64>::periodic(1, 64, 4.0).unwrap();
        let map = CellMap::new(&omega, &cell, 1.0 / 8.0).unwrap();
        assert_eq!(map.ratio, 1);
        assert_eq!(map.index(&omega, &cell, 70), 6);
        assert!(CellMap::new(&omega, &cell, 0.1).is_err());
    }
}
