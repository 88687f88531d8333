//! Experiment reports: labelled series, power-law fits, assertions and timing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x_label: &str, y_label: &str) -> Self {
        Self { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points: Vec::new() }
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.points.push((x, y));
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            let _ = writeln!(s, "{x:e},{y:e}");
        }
        s
    }
}

/// `log y = intercept + slope·log x` fitted by ordinary least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    /// Standard error of the slope (zero for exact fits or three-point-minimum edge cases).
    pub slope_stderr: f64,
}

impl PowerFit {
    /// Two-sided ~95% interval for the slope using a normal quantile.
    pub fn slope_interval(&self) -> (f64, f64) {
        (self.slope - 1.96 * self.slope_stderr, self.slope + 1.96 * self.slope_stderr)
    }
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::arg("series lengths differ"));
    }
    if xs.len() < 3 {
        return Err(Error::arg(format!("power-law fit needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::arg("power-law fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("power-law fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerFit { slope, intercept, r2, points: xs.len(), slope_stderr })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assertion {
    pub id: String,
    pub description: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub field_hash: Option<String>,
    pub series: Vec<Series>,
    pub fits: BTreeMap<String, Option<PowerFit>>,
    pub constants: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub assertions: Vec<Assertion>,
    /// Wall-clock seconds per stage; excluded from the hash.
    pub timing: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(kind: &str) -> Self {
        Self { kind: kind.into(), config: serde_json::Value::Null, ..Default::default() }
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Fits a named series; a degenerate series is recorded as `None`.
    pub fn fit(&mut self, series: &str) -> Option<PowerFit> {
        let fit = self.series(series).and_then(|s| fit_power_law(&s.xs(), &s.ys()).ok());
        self.fits.insert(series.to_string(), fit.clone());
        fit
    }

    pub fn assert_le(&mut self, id: &str, description: &str, value: f64, threshold: f64) -> bool {
        let passed = value <= threshold;
        self.assertions.push(Assertion { id: id.into(), description: description.into(), value, threshold, passed });
        passed
    }

    pub fn assert_ge(&mut self, id: &str, description: &str, value: f64, threshold: f64) -> bool {
        let passed = value >= threshold;
        self.assertions.push(Assertion { id: id.into(), description: description.into(), value, threshold, passed });
        passed
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        *self.timing.entry(stage.to_string()).or_insert(0.0) += seconds;
    }

    /// JSON without the timing block.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        serde_json::to_string(&v).expect("value serializes")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json` and one CSV per series into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json_pretty())?;
        std::fs::write(dir.join("report.sha256"), format!("{}\n", self.hash()))?;
        for s in &self.series {
            std::fs::write(dir.join(format!("{}.csv", s.name)), s.to_csv())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let f = fit_power_law(&xs, &xs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-13);
        assert!((f.r2 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..40).map(|k| 1.0 + k as f64 * 2.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sqrt() * (1.0 + rng.random_range(-0.05..0.05))).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope - 0.5).abs() <= 0.05, "{}", f.slope);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, -2.0, 3.0], &[1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn hash_ignores_timing() {
        let mut a = ExperimentReport::new("rho");
        let mut s = Series::new("rho", "L", "rho");
        s.push(1.0, 0.0);
        a.series.push(s);
        let mut b = a.clone();
        b.time("solve", 12.5);
        assert_eq!(a.hash(), b.hash());
        b.values.insert("x".into(), 1.0);
        assert_ne!(a.hash(), b.hash());
    }
}
