//! Approximate correctors `χ_T`, effective tensors, flux and dual correctors.

mod dual;
mod effective;
mod studies;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{gradient, windowed_norm, write_apf, DiscreteField, Grid, Location};
use crate::scalar::Real;
use crate::solver::{assemble, edge_flux, solve_krylov, SolveOptions, SolveReport};

pub use dual::{flux_and_dual, DualCorrectorSet};
pub use effective::{effective_tensor, EffectiveTensor};
pub use studies::{cauchy_study, growth_study, ThetaOptions};

/// How a field that does not tile the box is made periodic on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxPolicy {
    /// Snap every frequency to the box's reciprocal lattice.
    #[default]
    Periodize,
    /// Sample the field as is; the periodic extension has seams.
    Truncate,
}

const MIN_PERIODIC_SIDE: f64 = 4.0;

/// Box side and resolution for a corrector solve at scale `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GridRule {
    pub box_side: Option<f64>,
    pub n: Option<usize>,
    /// Minimum box side in units of `T` for fields that do not tile the box.
    pub box_factor: f64,
    /// Grid points per shortest coefficient wavelength.
    pub points_per_wavelength: f64,
    pub min_n: usize,
    pub policy: BoxPolicy,
}

impl Default for GridRule {
    fn default() -> Self {
        Self {
            box_side: None,
            n: None,
            box_factor: 8.0,
            points_per_wavelength: 16.0,
            min_n: 16,
            policy: BoxPolicy::Periodize,
        }
    }
}

impl GridRule {
    pub fn fixed(box_side: f64, n: usize) -> Self {
        Self { box_side: Some(box_side), n: Some(n), ..Self::default() }
    }

    /// Largest admissible spacing for `field`.
    pub fn max_spacing<T: Real>(&self, field: &CoefficientField<T>) -> f64 {
        let w = field.max_frequency().as_f64();
        if w > 0.0 {
            std::f64::consts::TAU / (self.points_per_wavelength * w)
        } else {
            f64::INFINITY
        }
    }

    /// The periodic grid for scale `t`. Fields that tile the box are solved exactly
    /// and need no `box_factor·T` margin; periodic fields default to a box of a few
    /// periods.
    pub fn grid_for<T: Real>(&self, field: &CoefficientField<T>, t: f64) -> Result<Grid<T>> {
        if !(t > 0.0) {
            return Err(Error::arg("T must be positive"));
        }
        let required = self.box_factor * t;
        let side = match self.box_side {
            Some(s) => s,
            None => match field.period() {
                // the corrector of a periodic field is itself periodic, so any box that
                // tiles the period is exact; keep at least side 4 for unit windows
                Some(p) if p.iter().all(|&q| q == p[0]) => {
                    let q = p[0].as_f64();
                    (MIN_PERIODIC_SIDE / q).ceil().max(1.0) * q
                }
                _ if field.is_constant() => MIN_PERIODIC_SIDE,
                _ => required,
            },
        };
        if !field.tiles_box(T::lit(side)) && side < required * (1.0 - 1e-12) {
            return Err(Error::BoxTooSmall { side, required });
        }
        let hmax = self.max_spacing(field);
        let n = match self.n {
            Some(n) => {
                let h = side / n as f64;
                if h > hmax * (1.0 + 1e-12) {
                    return Err(Error::UnderResolved { h, required: hmax });
                }
                n
            }
            None => {
                let cells = if hmax.is_finite() { (side / hmax).ceil() as usize } else { 1 };
                cells.max(self.min_n).next_power_of_two()
            }
        };
        Grid::periodic(field.dim(), n, T::lit(side))
    }

    /// The field actually solved on a box of the given side.
    pub fn box_field<T: Real>(&self, field: &CoefficientField<T>, side: T) -> CoefficientField<T> {
        if field.tiles_box(side) || self.policy == BoxPolicy::Truncate {
            field.clone()
        } else {
            field.periodized(side)
        }
    }
}

/// The columns `χ_{T,j}^β` for one field, scale and grid.
#[derive(Clone, Debug)]
pub struct CorrectorSet<T: Real> {
    field: CoefficientField<T>,
    box_field: CoefficientField<T>,
    t: f64,
    grid: Grid<T>,
    columns: Vec<DiscreteField<T>>,
    gradients: Vec<DiscreteField<T>>,
    reports: Vec<SolveReport>,
}

/// Unit edge field `∇P_j^β`: one in component `(j, β)`.
pub(crate) fn unit_gradient<T: Real>(grid: &Grid<T>, m: usize, j: usize, beta: usize) -> DiscreteField<T> {
    let mut e = DiscreteField::zeros(grid, grid.dim() * m, Location::Edge);
    let comp = j * m + beta;
    for (p, v) in e.component_mut(comp).iter_mut().enumerate() {
        if grid.has_edge(p, j) {
            *v = T::one();
        }
    }
    e
}

/// Solves `−div(A∇χ) + T⁻²χ = div(A∇P_j^β)` for every column on the grid given by `rule`.
pub fn solve_corrector<T: Real>(
    field: &CoefficientField<T>,
    t: f64,
    rule: &GridRule,
    opts: &SolveOptions,
) -> Result<CorrectorSet<T>> {
    let grid = rule.grid_for(field, t)?;
    solve_corrector_on(field, t, &grid, rule.policy, opts)
}

/// As [`solve_corrector`] on a given periodic grid.
pub fn solve_corrector_on<T: Real>(
    field: &CoefficientField<T>,
    t: f64,
    grid: &Grid<T>,
    policy: BoxPolicy,
    opts: &SolveOptions,
) -> Result<CorrectorSet<T>> {
    if !grid.is_periodic() {
        return Err(Error::arg("correctors are solved on periodic grids"));
    }
    field.check_ellipticity()?;
    let rule = GridRule { policy, ..GridRule::default() };
    let box_field = rule.box_field(field, grid.side());
    let lambda = T::lit(1.0 / (t * t));
    let op = assemble(&box_field, grid, lambda)?;
    let (d, m) = (field.dim(), field.m());
    let solved: Vec<(DiscreteField<T>, DiscreteField<T>, SolveReport)> = (0..d * m)
        .into_par_iter()
        .map(|c| {
            let e = unit_gradient(grid, m, c / m, c % m);
            let rhs = crate::grid::divergence(&edge_flux(&box_field, &e)?)?;
            let (chi, rep) = solve_krylov(&op, &rhs, opts)?;
            let grad = gradient(&chi)?;
            Ok((chi, grad, rep))
        })
        .collect::<Result<_>>()?;
    let mut columns = Vec::with_capacity(d * m);
    let mut gradients = Vec::with_capacity(d * m);
    let mut reports = Vec::with_capacity(d * m);
    for (c, g, r) in solved {
        columns.push(c);
        gradients.push(g);
        reports.push(r);
    }
    Ok(CorrectorSet { field: field.clone(), box_field, t, grid: grid.clone(), columns, gradients, reports })
}

impl<T: Real> CorrectorSet<T> {
    pub fn field(&self) -> &CoefficientField<T> {
        &self.field
    }

    /// The coefficients on the solve box (periodized unless the field tiles it).
    pub fn box_field(&self) -> &CoefficientField<T> {
        &self.box_field
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda(&self) -> T {
        T::lit(1.0 / (self.t * self.t))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Column `χ_{T,j}^β` (an `m`-component node field).
    pub fn column(&self, j: usize, beta: usize) -> &DiscreteField<T> {
        &self.columns[j * self.field.m() + beta]
    }

    pub fn columns(&self) -> &[DiscreteField<T>] {
        &self.columns
    }

    /// Edge gradient of column `(j, β)`.
    pub fn gradient(&self, j: usize, beta: usize) -> &DiscreteField<T> {
        &self.gradients[j * self.field.m() + beta]
    }

    pub fn gradients(&self) -> &[DiscreteField<T>] {
        &self.gradients
    }

    pub fn reports(&self) -> &[SolveReport] {
        &self.reports
    }

    /// All columns as one node field, column-major in `(j, β)` then `α`.
    pub fn chi(&self) -> DiscreteField<T> {
        DiscreteField::stack(&self.columns.iter().collect::<Vec<_>>()).expect("same grid")
    }

    pub fn grad_chi(&self) -> DiscreteField<T> {
        DiscreteField::stack(&self.gradients.iter().collect::<Vec<_>>()).expect("same grid")
    }

    /// `‖∇χ_T‖_{S²_R}` over all columns.
    pub fn grad_norm(&self, radius: f64) -> Result<T> {
        windowed_norm(&self.grad_chi(), T::lit(2.0), T::lit(radius))
    }

    /// `‖χ_T‖_{S²_R}` over all columns.
    pub fn chi_norm(&self, radius: f64) -> Result<T> {
        windowed_norm(&self.chi(), T::lit(2.0), T::lit(radius))
    }

    /// Writes `chi.apf`, `grad_chi.apf` and `manifest.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_apf(dir.join("chi.apf"), &self.chi())?;
        write_apf(dir.join("grad_chi.apf"), &self.grad_chi())?;
        let manifest = serde_json::json!({
            "fieldHash": self.field.content_hash(),
            "T": self.t,
            "grid": {
                "dim": self.grid.dim(),
                "n": self.grid.n(),
                "boxSide": self.grid.side().as_f64(),
                "boundary": self.grid.boundary(),
            },
            "residuals": self.reports.iter().map(|r| r.final_relative_residual).collect::<Vec<_>>(),
            "iterations": self.reports.iter().map(|r| r.iterations).collect::<Vec<_>>(),
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_norm, roll};
    use crate::tensor::Tensor;
    use std::f64::consts::{SQRT_2, TAU};

    fn periodic1d() -> CoefficientField<f64> {
        CoefficientField::scalar_isotropic(1, 2.0, &[(vec![TAU], 1.0, 0.0)], 1.0 / 3.0, Some(vec![1.0])).unwrap()
    }

    #[test]
    fn grid_rule_defaults() {
        let r = GridRule::default();
        let g: Grid<f64> = r.grid_for(&periodic1d(), 4.0).unwrap();
        assert_eq!(g.side(), 4.0);
        assert!(g.h() <= 1.0 / 16.0);
        let q = CoefficientField::<f64>::scalar_isotropic(
            1,
            3.0,
            &[(vec![1.0], 1.0, 0.0), (vec![SQRT_2], 1.0, 0.0)],
            0.2,
            None,
        )
        .unwrap();
        assert!(matches!(GridRule::fixed(16.0, 256).grid_for(&q, 4.0), Err(Error::BoxTooSmall { .. })));
        assert!(matches!(GridRule::fixed(32.0, 32).grid_for(&q, 4.0), Err(Error::UnderResolved { .. })));
        // a periodic field tiles any multiple of its period
        assert!(GridRule::fixed(4.0, 64).grid_for(&periodic1d(), 16.0).is_ok());
    }

    #[test]
    fn constant_field_has_zero_corrector() {
        let a = Tensor::from_vec(2, vec![2.0, 0.5, 0.5, 1.0]);
        let f = CoefficientField::constant(2, 1, a, 0.4).unwrap();
        let set = solve_corrector(&f, 4.0, &GridRule::fixed(8.0, 16), &SolveOptions::default()).unwrap();
        assert!(set.chi_norm(1.0).unwrap() <= 1e-12);
    }

    #[test]
    fn residual_contract() {
        let set = solve_corrector(&periodic1d(), 4.0, &GridRule::fixed(4.0, 64), &SolveOptions::default()).unwrap();
        assert!(set.reports().iter().all(|r| r.final_relative_residual <= 1e-10));
        // one-dimensional flux a(1 + χ') is close to constant
        let flux =
            edge_flux(set.box_field(), &set.gradient(0, 0).add(&unit_gradient(set.grid(), 1, 0, 0)).unwrap()).unwrap();
        let (lo, hi) = flux.data().iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo < 0.05, "{lo} {hi}");
    }

    #[test]
    fn translation_equivariance() {
        let f = CoefficientField::<f64>::scalar_isotropic(
            2,
            2.0,
            &[(vec![TAU, 0.0], 0.5, 0.2), (vec![0.0, TAU], 0.3, 0.0)],
            0.3,
            Some(vec![1.0, 1.0]),
        )
        .unwrap();
        let rule = GridRule::fixed(2.0, 32);
        let opts = SolveOptions { tol: 1e-12, ..Default::default() };
        let a = solve_corrector(&f, 1.0, &rule, &opts).unwrap();
        let shift = [3isize, 5];
        let h = 2.0 / 32.0;
        let moved = f.translate(&[3.0 * h, 5.0 * h]);
        let b = solve_corrector(&moved, 1.0, &rule, &opts).unwrap();
        for c in 0..2 {
            let expected = roll(&a.columns()[c], &shift).unwrap();
            let err = l2_norm(&expected.sub(&b.columns()[c]).unwrap());
            assert!(err <= 1e-8, "{err}");
        }
    }

    #[test]
    fn save_writes_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let set = solve_corrector(&periodic1d(), 2.0, &GridRule::fixed(2.0, 32), &SolveOptions::default()).unwrap();
        set.save(dir.path()).unwrap();
        let chi: DiscreteField<f64> = crate::grid::read_apf(dir.path().join("chi.apf")).unwrap();
        assert_eq!(&chi, &set.chi());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["T"], 2.0);
    }
}
