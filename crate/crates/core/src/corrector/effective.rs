use serde::{Deserialize, Serialize};

use super::{unit_gradient, CorrectorSet};
use crate::error::Result;
use crate::grid::mean;
use crate::scalar::Real;
use crate::solver::edge_flux;
use crate::tensor::Tensor;

/// `Â_T = ⟨A + A∇χ_T⟩` with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", bound = "T: Real")]
pub struct EffectiveTensor<T: Real> {
    pub values: Tensor<T>,
    pub t: f64,
    pub symmetric_part: Tensor<T>,
    pub skew_part: Tensor<T>,
    /// Extreme eigenvalues of the symmetric part.
    pub eig_range: (f64, f64),
}

impl<T: Real> EffectiveTensor<T> {
    pub fn new(values: Tensor<T>, t: f64) -> Self {
        let symmetric_part = values.sym_part();
        let skew_part = values.skew_part();
        let eig_range = symmetric_part.sym_eig_range();
        Self { values, t, symmetric_part, skew_part, eig_range }
    }

    /// `μ ≤ λ_min(sym Â)` and `λ_max(sym Â) ≤ upper`.
    pub fn within(&self, mu: f64, upper: f64) -> bool {
        self.eig_range.0 >= mu * (1.0 - 1e-12) && self.eig_range.1 <= upper
    }
}

/// Box average of the discrete flux `M(∇P_j^β + ∇χ_{T,j}^β)`; column `(j,β)` gives
/// `â_{·j}^{·β}`.
pub fn effective_tensor<T: Real>(set: &CorrectorSet<T>) -> Result<EffectiveTensor<T>> {
    let g = set.grid();
    let (d, m) = (g.dim(), set.field().m());
    let side = d * m;
    let mut values = Tensor::zeros(side);
    for col in 0..side {
        let e = unit_gradient(g, m, col / m, col % m).add(&set.gradients()[col])?;
        let flux = edge_flux(set.box_field(), &e)?;
        for (row, v) in mean(&flux).into_iter().enumerate() {
            values.set(row, col, v);
        }
    }
    Ok(EffectiveTensor::new(values, set.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoefficientField;
    use crate::corrector::{solve_corrector, GridRule};
    use crate::solver::SolveOptions;
    use std::f64::consts::TAU;

    #[test]
    fn constant_is_reproduced() {
        let a = Tensor::from_vec(2, vec![2.0, 0.5, 0.5, 1.0]);
        let f = CoefficientField::constant(2, 1, a.clone(), 0.4).unwrap();
        let set = solve_corrector(&f, 4.0, &GridRule::fixed(8.0, 16), &SolveOptions::default()).unwrap();
        let eff = effective_tensor(&set).unwrap();
        assert!(eff.values.max_abs_diff(&a) <= 1e-12);
    }

    #[test]
    fn one_dimensional_harmonic_mean() {
        let f =
            CoefficientField::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0])).unwrap();
        let set = solve_corrector(&f, 16.0, &GridRule::fixed(8.0, 512), &SolveOptions::default()).unwrap();
        let eff = effective_tensor(&set).unwrap();
        assert!((eff.values.get(0, 0) - 3f64.sqrt()).abs() < 0.017);
        assert!(eff.within(1.0 / 3.0, 3.0));
    }

    #[test]
    fn adjoint_transposes() {
        let f = CoefficientField::<f64>::from_json_str(
            r#"{"dim":2,"mu":0.25,"const":[[2.0,0.4],[-0.3,1.5]],
                "modes":[{"omega":[6.283185307179586,0.0],"cos":[[0.4,0.1],[0.0,0.3]],"sin":[[0.0,0.2],[0.1,0.0]]}],
                "period":[1.0,1.0]}"#,
        )
        .unwrap();
        let rule = GridRule::fixed(2.0, 32);
        let opts = SolveOptions::default();
        let a = effective_tensor(&solve_corrector(&f, 2.0, &rule, &opts).unwrap()).unwrap();
        let b = effective_tensor(&solve_corrector(&f.adjoint(), 2.0, &rule, &opts).unwrap()).unwrap();
        assert!(b.values.max_abs_diff(&a.values.transpose()) <= 2e-10);
    }
}
