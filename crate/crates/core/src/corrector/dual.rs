use rayon::prelude::*;

use super::effective::effective_tensor;
use super::{unit_gradient, CorrectorSet};
use crate::error::Result;
use crate::grid::{centered_derivative, edge_to_node, l2_norm, mean, write_apf, DiscreteField, Location};
use crate::scalar::Real;
use crate::solver::{edge_flux, solve_fft};
use crate::tensor::Tensor;

/// Flux `b_T`, its box mean, the dual correctors `φ_T` and `h_T`.
///
/// Component layout: `b` and `φ` use `(i·m+α)·d·m + (j·m+β)`; `h` uses
/// `α·d·m + (j·m+β)`. All fields live on nodes.
#[derive(Clone, Debug)]
pub struct DualCorrectorSet<T: Real> {
    pub b: DiscreteField<T>,
    pub b_mean: Tensor<T>,
    pub phi: DiscreteField<T>,
    pub h: DiscreteField<T>,
    lambda: T,
    dim: usize,
    m: usize,
}

/// Builds `b_T = A + A∇χ_T − Â_T` at nodes and solves `−Δφ + T⁻²φ = b − ⟨b⟩`.
pub fn flux_and_dual<T: Real>(set: &CorrectorSet<T>) -> Result<DualCorrectorSet<T>> {
    let g = set.grid();
    let (d, m) = (g.dim(), set.field().m());
    let side = d * m;
    let a_hat = effective_tensor(set)?.values;
    let cols: Vec<DiscreteField<T>> = (0..side)
        .into_par_iter()
        .map(|col| {
            let e = unit_gradient(g, m, col / m, col % m).add(&set.gradients()[col])?;
            edge_to_node(&edge_flux(set.box_field(), &e)?)
        })
        .collect::<Result<_>>()?;
    let n = g.num_nodes();
    let mut b = DiscreteField::zeros(g, side * side, Location::Node);
    for (col, flux) in cols.iter().enumerate() {
        for row in 0..side {
            let shift = a_hat.get(row, col);
            let dst = b.component_mut(row * side + col);
            for (o, &v) in dst.iter_mut().zip(flux.component(row)) {
                *o = v - shift;
            }
        }
    }
    let b_mean = Tensor::from_vec(side, mean(&b));
    let mut centered = b.clone();
    for c in 0..side * side {
        let mu = b_mean.as_slice()[c];
        centered.component_mut(c).iter_mut().for_each(|v| *v = *v - mu);
    }
    let lambda = set.lambda();
    let phi = solve_fft(lambda, &centered)?;
    let mut h = DiscreteField::zeros(g, m * side, Location::Node);
    for i in 0..d {
        let dphi = centered_derivative(&phi, i)?;
        for alpha in 0..m {
            for jb in 0..side {
                let src = dphi.component((i * m + alpha) * side + jb);
                let dst = h.component_mut(alpha * side + jb);
                for p in 0..n {
                    dst[p] = dst[p] + src[p];
                }
            }
        }
    }
    Ok(DualCorrectorSet { b, b_mean, phi, h, lambda, dim: d, m })
}

impl<T: Real> DualCorrectorSet<T> {
    fn side(&self) -> usize {
        self.dim * self.m
    }

    /// `b − [⟨b⟩ − ∂_k(∂_kφ_ij − ∂_iφ_kj) − ∂_i(∂_kφ_kj) + T⁻²φ_ij]` with centered
    /// differences throughout.
    pub fn reconstruction_residual(&self) -> Result<DiscreteField<T>> {
        let (d, m, side) = (self.dim, self.m, self.side());
        let dphi: Vec<DiscreteField<T>> = (0..d).map(|k| centered_derivative(&self.phi, k)).collect::<Result<_>>()?;
        let comp = |i: usize, alpha: usize, jb: usize| (i * m + alpha) * side + jb;
        let mut out = self.b.clone();
        for i in 0..d {
            for alpha in 0..m {
                for jb in 0..side {
                    let c = comp(i, alpha, jb);
                    // σ_k = ∂_kφ_ij − ∂_iφ_kj, then −∂_kσ_k − ∂_i(∂_kφ_kj)
                    let mut bracket = vec![T::zero(); self.b.grid().num_nodes()];
                    for k in 0..d {
                        let ck = comp(k, alpha, jb);
                        let sigma = dphi[k].extract(c).zip_with(&dphi[i].extract(ck), |a, b| a - b)?;
                        let ds = centered_derivative(&sigma, k)?;
                        let dd = centered_derivative(&dphi[k].extract(ck), i)?;
                        for ((o, &x), &y) in bracket.iter_mut().zip(ds.data()).zip(dd.data()) {
                            *o = *o - x - y;
                        }
                    }
                    let mean = self.b_mean.as_slice()[c];
                    let phi = self.phi.component(c);
                    for ((o, &br), &p) in out.component_mut(c).iter_mut().zip(&bracket).zip(phi) {
                        *o = *o - (mean + br + self.lambda * p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Σ_i ∂_i b_ij^{αβ} − T⁻²χ_j^{αβ}` (component `α·d·m + j·m+β`).
    pub fn divergence_residual(&self, set: &CorrectorSet<T>) -> Result<DiscreteField<T>> {
        let (d, m, side) = (self.dim, self.m, self.side());
        let g = self.b.grid();
        let mut out = DiscreteField::zeros(g, m * side, Location::Node);
        for i in 0..d {
            let db = centered_derivative(&self.b, i)?;
            for alpha in 0..m {
                for jb in 0..side {
                    let src = db.component((i * m + alpha) * side + jb);
                    for (o, &v) in out.component_mut(alpha * side + jb).iter_mut().zip(src) {
                        *o = *o + v;
                    }
                }
            }
        }
        for jb in 0..side {
            let chi = &set.columns()[jb];
            for alpha in 0..m {
                for (o, &v) in out.component_mut(alpha * side + jb).iter_mut().zip(chi.component(alpha)) {
                    *o = *o - self.lambda * v;
                }
            }
        }
        Ok(out)
    }

    /// `‖reconstruction residual‖₂ / ‖b‖₂` (zero when `b` vanishes).
    pub fn relative_reconstruction_error(&self) -> Result<T> {
        let r = l2_norm(&self.reconstruction_residual()?);
        let nb = l2_norm(&self.b);
        Ok(if nb > T::zero() { r / nb } else { r })
    }

    /// Writes `b.apf`, `phi.apf`, `h.apf` and `dual_manifest.json`.
    pub fn save(&self, dir: impl AsRef<std::path::Path>, set: &CorrectorSet<T>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_apf(dir.join("b.apf"), &self.b)?;
        write_apf(dir.join("phi.apf"), &self.phi)?;
        write_apf(dir.join("h.apf"), &self.h)?;
        let manifest = serde_json::json!({
            "fieldHash": set.field().content_hash(),
            "T": set.t(),
            "grid": { "dim": self.dim, "n": set.grid().n(), "boxSide": set.grid().side().as_f64() },
            "bMean": self.b_mean.to_f64(),
            "reconstructionResidual": l2_norm(&self.reconstruction_residual()?).as_f64(),
            "divergenceResidual": l2_norm(&self.divergence_residual(set)?).as_f64(),
        });
        std::fs::write(dir.join("dual_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
