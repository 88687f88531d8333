//! Experiment configuration files.

use std::path::{Path, PathBuf};

use aphom_core::bvp::{DirichletProblem, RateOptions};
use aphom_core::coeff::SamplingPlan;
use aphom_core::corrector::{GridRule, ThetaOptions};
use aphom_core::report::ExperimentReport;
use aphom_core::solver::SolveOptions;
use aphom_core::twoscale::TwoScaleOptions;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    FieldCheck,
    Rho,
    Corrector,
    Effective,
    Dual,
    Growth,
    Cauchy,
    Theta,
    Twoscale,
    Rate,
    Profile,
    Liouville,
    /// Heat semigroup, heat decay and oscillation checks.
    Ergodic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// A threshold on a report metric, e.g. `fit.l2err.slope >= 0.9`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssertionSpec {
    pub id: String,
    pub metric: String,
    pub op: Op,
    pub value: f64,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub kind: Kind,
    /// Coefficient field file, relative to the config file.
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub assertions: Vec<AssertionSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn field_path(&self) -> Option<PathBuf> {
        self.field.as_ref().map(|f| if f.is_absolute() { f.clone() } else { self.base_dir.join(f) })
    }

    pub fn params<P: for<'de> Deserialize<'de>>(&self) -> Result<P, RunError> {
        let v = if self.params.is_null() { serde_json::json!({}) } else { self.params.clone() };
        serde_json::from_value(v).map_err(|e| RunError::Config(format!("params for {:?}: {e}", self.kind)))
    }
}

fn default_k() -> usize {
    1
}

fn default_q_bar() -> f64 {
    4.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FieldCheckParams {
    #[serde(default = "FieldCheckParams::probes")]
    pub probes: usize,
    #[serde(default = "FieldCheckParams::span")]
    pub span: f64,
    /// Also compute `Â_T` and check its symmetric-part spectrum.
    #[serde(default)]
    pub effective_t: Option<f64>,
    #[serde(default)]
    pub rule: GridRule,
    #[serde(default)]
    pub solve: SolveOptions,
    /// Summation-by-parts defect on a random field over this many nodes per side.
    #[serde(default)]
    pub sbp_nodes: Option<usize>,
}

impl FieldCheckParams {
    fn probes() -> usize {
        256
    }
    fn span() -> f64 {
        64.0
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RhoParams {
    #[serde(default = "default_k")]
    pub k: usize,
    pub l_values: Vec<f64>,
    pub r: f64,
    #[serde(default = "default_q_bar")]
    pub q_bar: f64,
    #[serde(default)]
    pub plan: SamplingPlan,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CorrectorParams {
    pub t: f64,
    #[serde(default)]
    pub rule: GridRule,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default = "yes")]
    pub save: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EffectiveParams {
    pub t: f64,
    #[serde(default)]
    pub rule: GridRule,
    #[serde(default)]
    pub solve: SolveOptions,
    /// Also solve with `A*` and compare against the transpose.
    #[serde(default)]
    pub adjoint: bool,
    /// Reference tensor, row-major rows.
    #[serde(default)]
    pub oracle: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DualParams {
    pub t: f64,
    pub side: f64,
    /// Nodes per side, one run each; more than two gives an order fit.
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub save: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GrowthParams {
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub rule: GridRule,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub theta: Option<ThetaOptions>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ThetaParams {
    #[serde(default = "default_k")]
    pub k: usize,
    pub sigma: f64,
    pub c: f64,
    pub t_max: f64,
    #[serde(default = "default_q_bar")]
    pub q_bar: f64,
    #[serde(default)]
    pub plan: SamplingPlan,
    /// Use `ρ ≡ 0` instead of measuring the field.
    #[serde(default)]
    pub zero_rho: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TwoScaleParams {
    pub epsilons: Vec<f64>,
    pub problem: DirichletProblem,
    #[serde(default)]
    pub options: TwoScaleOptions,
    /// Dump `w_ε` for the smallest `ε`.
    #[serde(default)]
    pub save: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RateParams {
    pub epsilons: Vec<f64>,
    pub problem: DirichletProblem,
    #[serde(default)]
    pub options: RateOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProfileParams {
    pub problem: DirichletProblem,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub solve: SolveOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LiouvilleParams {
    pub dim: usize,
    pub sigma: f64,
    pub radii: Vec<f64>,
    pub r: f64,
    pub cells_per_unit: usize,
    #[serde(default)]
    pub solve: SolveOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ErgodicParams {
    /// Periodic sampling box for `g(y) = a₁₁(y) − ⟨a₁₁⟩`.
    pub side: f64,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub plan: SamplingPlan,
    #[serde(default)]
    pub semigroup: Option<[f64; 2]>,
    #[serde(default)]
    pub heat: Option<HeatParams>,
    #[serde(default)]
    pub oscillation: Option<OscillationParams>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HeatParams {
    pub l: f64,
    pub r: f64,
    pub t_values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OscillationParams {
    pub l_values: Vec<f64>,
    pub r_values: Vec<f64>,
}

/// Looks up a metric path in a report: `fit.<series>.<slope|r2|intercept>`,
/// `value.<name>`, `constant.<name>`, `series.<name>.<max|min|first|last>` or
/// `check.<assertion id>` (1 when that built-in assertion passed).
pub fn metric(report: &ExperimentReport, path: &str) -> Option<f64> {
    let (head, rest) = path.split_once('.')?;
    match head {
        "value" => report.values.get(rest).copied(),
        "constant" => report.constants.get(rest).copied(),
        "check" => report.assertions.iter().find(|a| a.id == rest).map(|a| a.passed as u8 as f64),
        "fit" => {
            let (name, field) = rest.rsplit_once('.')?;
            let fit = report.fits.get(name)?.as_ref()?;
            match field {
                "slope" => Some(fit.slope),
                "r2" => Some(fit.r2),
                "intercept" => Some(fit.intercept),
                _ => None,
            }
        }
        "series" => {
            let (name, agg) = rest.rsplit_once('.')?;
            let ys = report.series(name)?.ys();
            match agg {
                "max" => ys.iter().cloned().reduce(f64::max),
                "min" => ys.iter().cloned().reduce(f64::min),
                "first" => ys.first().copied(),
                "last" => ys.last().copied(),
                _ => None,
            }
        }
        _ => None,
    }
}
