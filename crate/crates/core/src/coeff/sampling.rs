//! Deterministic low-discrepancy sampling for the sup/inf estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the `sup_y`, `inf_z` and `sup_x` of the moduli are discretized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SamplingPlan {
    /// Shift vectors `y` per sup level.
    pub shifts: usize,
    /// Window centers for `S^p_R` norms on `ℝ^d`.
    pub centers: usize,
    /// Side of the cube `[0, span)^d` that shifts and centers are drawn from.
    pub span: f64,
    /// The z-lattice spacing is `L / z_divisions` unless `z_spacing` is set.
    pub z_divisions: usize,
    pub z_spacing: Option<f64>,
    /// Quadrature spacing inside windows; derived from the field's frequencies when absent.
    pub quad_spacing: Option<f64>,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { shifts: 64, centers: 64, span: 64.0, z_divisions: 16, z_spacing: None, quad_spacing: None, seed: 0 }
    }
}

impl SamplingPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn z_step(&self, l: f64) -> f64 {
        self.z_spacing.unwrap_or(l / self.z_divisions.max(1) as f64)
    }

    /// `count` points of the additive `R_d` sequence in `[0, span)^dim`, with a
    /// Cranley–Patterson offset drawn from `(seed, stream)`.
    pub fn points(&self, dim: usize, count: usize, stream: u64) -> Vec<Vec<f64>> {
        kronecker(dim, count, self.span, self.seed, stream)
    }
}

/// Generalized golden-ratio sequence `frac(u + n·α)`, `α_i = φ_d^{−(i+1)}` with
/// `φ_d` the positive root of `x^{d+1} = x + 1`.
pub fn kronecker(dim: usize, count: usize, span: f64, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (0..dim).map(|i| phi.powi(-(i as i32 + 1))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let offset: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count).map(|n| (0..dim).map(|i| (offset[i] + n as f64 * alpha[i]).fract() * span).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let p = SamplingPlan::default().with_seed(9);
        let a = p.points(2, 100, 1);
        assert_eq!(a, p.points(2, 100, 1));
        assert_ne!(a, p.points(2, 100, 2));
        assert!(a.iter().flatten().all(|&v| (0.0..64.0).contains(&v)));
    }

    #[test]
    fn low_discrepancy_fills_bins() {
        // every one of 16 bins gets a point from 32 samples
        let pts = kronecker(1, 32, 1.0, 0, 0);
        let mut bins = [0; 16];
        for p in &pts {
            bins[(p[0] * 16.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&b| b >= 1), "{bins:?}");
    }

    #[test]
    fn golden_ratio_in_1d() {
        let pts = kronecker(1, 2, 1.0, 0, 0);
        let step = (pts[1][0] - pts[0][0]).rem_euclid(1.0);
        assert!((step - 0.618_033_988_749_895).abs() < 1e-12);
    }
}
