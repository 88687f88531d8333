use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// One term `cosAmp·cos(ω·y) + sinAmp·sin(ω·y)` of a trigonometric polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMode<T> {
    pub omega: Vec<T>,
    pub cos_amp: Tensor<T>,
    pub sin_amp: Tensor<T>,
}

impl<T: Real> TrigMode<T> {
    #[inline]
    fn phase(&self, y: &[T]) -> T {
        self.omega.iter().zip(y).map(|(&w, &x)| w * x).sum()
    }

    fn frequency(&self) -> T {
        crate::scalar::norm2(&self.omega)
    }
}

/// Anything that can be sampled as a coefficient tensor `A(y)`.
pub trait TensorField<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn m(&self) -> usize;
    /// Writes `A(y)` into `out` (length `(d·m)²`, row-major in `(i,α,j,β)`).
    fn eval_into(&self, y: &[T], out: &mut [T]);
    fn is_symmetric(&self) -> bool;
    /// Lower bound on the ellipticity constant, if known.
    fn ellipticity(&self) -> Option<T> {
        None
    }
    /// Checks whatever ellipticity guarantee the field carries.
    fn certify(&self) -> Result<()> {
        Ok(())
    }
}

/// A real trigonometric-polynomial coefficient field with ellipticity metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    dim: usize,
    m: usize,
    const_term: Tensor<T>,
    modes: Vec<TrigMode<T>>,
    mu: T,
    period: Option<Vec<T>>,
}

/// Result of the closed-form ellipticity certificate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EllipticityCertificate {
    /// `λ_min(sym A₀) − Σ_k (‖C_k‖₂ + ‖S_k‖₂)`
    pub lower: f64,
    /// `λ_max(sym A₀) + Σ_k (‖C_k‖₂ + ‖S_k‖₂)`
    pub upper: f64,
    pub mu: f64,
}

impl EllipticityCertificate {
    pub fn passes(&self) -> bool {
        self.lower >= self.mu && self.upper <= 1.0 / self.mu
    }
}

impl<T: Real> CoefficientField<T> {
    pub fn new(
        dim: usize,
        m: usize,
        const_term: Tensor<T>,
        modes: Vec<TrigMode<T>>,
        mu: T,
        period: Option<Vec<T>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidField(format!("dimension {dim} not in 1..=3")));
        }
        if m == 0 {
            return Err(Error::InvalidField("system size m must be >= 1".into()));
        }
        let side = dim * m;
        let check = |t: &Tensor<T>, what: &str| -> Result<()> {
            if t.side() != side {
                return Err(Error::InvalidField(format!("{what} has side {} but d·m = {side}", t.side())));
            }
            if t.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidField(format!("{what} has non-finite entries")));
            }
            Ok(())
        };
        check(&const_term, "const term")?;
        for (k, mode) in modes.iter().enumerate() {
            if mode.omega.len() != dim {
                return Err(Error::InvalidField(format!("mode {k}: omega has wrong length")));
            }
            if mode.omega.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidField(format!("mode {k}: omega not finite")));
            }
            if mode.omega.iter().all(|w| w.is_zero()) {
                return Err(Error::InvalidField(format!("mode {k}: zero frequency is reserved for the constant term")));
            }
            check(&mode.cos_amp, &format!("mode {k} cos amplitude"))?;
            check(&mode.sin_amp, &format!("mode {k} sin amplitude"))?;
        }
        if !(mu > T::zero() && mu <= T::one()) {
            return Err(Error::InvalidField(format!("mu = {mu} must lie in (0, 1]")));
        }
        let field = Self { dim, m, const_term, modes, mu, period: None };
        match period {
            Some(p) => field.with_period(p),
            None => Ok(field),
        }
    }

    /// Declares a period lattice after checking every frequency is commensurate with it.
    pub fn with_period(mut self, period: Vec<T>) -> Result<Self> {
        if period.len() != self.dim || period.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidField("period must have d positive entries".into()));
        }
        for (k, mode) in self.modes.iter().enumerate() {
            for (i, (&w, &p)) in mode.omega.iter().zip(&period).enumerate() {
                let cycles = (w * p / T::TAU()).as_f64();
                if (cycles - cycles.round()).abs() > 1e-9 * (1.0 + cycles.abs()) {
                    return Err(Error::InvalidField(format!(
                        "mode {k} is not periodic with period {} along axis {i}",
                        p
                    )));
                }
            }
        }
        self.period = Some(period);
        Ok(self)
    }

    /// Constant coefficient field.
    pub fn constant(dim: usize, m: usize, a: Tensor<T>, mu: T) -> Result<Self> {
        Self::new(dim, m, a, Vec::new(), mu, None)
    }

    /// Scalar isotropic field `a(y)·I` with `a(y) = c + Σ (c_k cos(ω_k·y) + s_k sin(ω_k·y))`.
    pub fn scalar_isotropic(
        dim: usize,
        mean: T,
        modes: &[(Vec<T>, T, T)],
        mu: T,
        period: Option<Vec<T>>,
    ) -> Result<Self> {
        let modes = modes
            .iter()
            .map(|(w, c, s)| TrigMode {
                omega: w.clone(),
                cos_amp: Tensor::scaled_identity(dim, *c),
                sin_amp: Tensor::scaled_identity(dim, *s),
            })
            .collect();
        Self::new(dim, 1, Tensor::scaled_identity(dim, mean), modes, mu, period)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn const_term(&self) -> &Tensor<T> {
        &self.const_term
    }

    pub fn modes(&self) -> &[TrigMode<T>] {
        &self.modes
    }

    pub fn period(&self) -> Option<&[T]> {
        self.period.as_deref()
    }

    pub fn is_constant(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest `|ω_k|` (zero for a constant field).
    pub fn max_frequency(&self) -> T {
        self.modes.iter().map(|m| m.frequency()).fold(T::zero(), T::max)
    }

    /// Largest `|ω_k|_∞` across modes, the quantity that limits axis-aligned grids.
    pub fn max_axis_frequency(&self) -> T {
        self.modes.iter().flat_map(|m| m.omega.iter().map(|&w| num_traits::Float::abs(w))).fold(T::zero(), T::max)
    }

    /// `A(y) = A₀ + Σ_k [C_k cos(ω_k·y) + S_k sin(ω_k·y)]`.
    pub fn evaluate(&self, y: &[T]) -> Tensor<T> {
        let mut out = Tensor::zeros(self.dim * self.m);
        self.eval_into(y, out.as_mut_slice());
        out
    }

    pub fn certificate(&self) -> EllipticityCertificate {
        let (lo, hi) = self.const_term.sym_eig_range();
        let spread: f64 = self.modes.iter().map(|m| m.cos_amp.spectral_norm() + m.sin_amp.spectral_norm()).sum();
        EllipticityCertificate { lower: lo - spread, upper: hi + spread, mu: self.mu.as_f64() }
    }

    pub fn check_ellipticity(&self) -> Result<EllipticityCertificate> {
        let cert = self.certificate();
        if cert.passes() {
            Ok(cert)
        } else {
            Err(Error::NotElliptic { lower: cert.lower, upper: cert.upper, mu: cert.mu })
        }
    }

    /// Samples `ξᵀA(y)ξ / |ξ|²` at random `(y, ξ)`; returns the (min, max) ratio observed.
    pub fn sampled_ellipticity(&self, probes: usize, span: f64, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = self.dim * self.m;
        let mut a = vec![T::zero(); side * side];
        let mut y = vec![T::zero(); self.dim];
        let mut xi = vec![0.0f64; side];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..probes {
            for v in y.iter_mut() {
                *v = T::lit(rng.random_range(-span..span));
            }
            self.eval_into(&y, &mut a);
            for v in xi.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let nrm: f64 = xi.iter().map(|v| v * v).sum();
            if nrm < 1e-12 {
                continue;
            }
            let mut q = 0.0;
            for r in 0..side {
                for c in 0..side {
                    q += xi[r] * a[r * side + c].as_f64() * xi[c];
                }
            }
            lo = lo.min(q / nrm);
            hi = hi.max(q / nrm);
        }
        (lo, hi)
    }

    /// The adjoint field `A*`, i.e. `(a*)_{ij}^{αβ} = a_{ji}^{βα}`.
    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            m: self.m,
            const_term: self.const_term.transpose(),
            modes: self
                .modes
                .iter()
                .map(|md| TrigMode {
                    omega: md.omega.clone(),
                    cos_amp: md.cos_amp.transpose(),
                    sin_amp: md.sin_amp.transpose(),
                })
                .collect(),
            mu: self.mu,
            period: self.period.clone(),
        }
    }

    /// The translate `y ↦ A(y + shift)`.
    pub fn translate(&self, shift: &[T]) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|md| {
                let (s, c) = md.phase(shift).sin_cos();
                let mut cos_amp = md.cos_amp.clone();
                cos_amp.as_mut_slice().iter_mut().for_each(|v| *v = *v * c);
                cos_amp.axpy(s, &md.sin_amp);
                let mut sin_amp = md.sin_amp.clone();
                sin_amp.as_mut_slice().iter_mut().for_each(|v| *v = *v * c);
                sin_amp.axpy(-s, &md.cos_amp);
                TrigMode { omega: md.omega.clone(), cos_amp, sin_amp }
            })
            .collect();
        Self { modes, ..self.clone() }
    }

    /// True when the declared period lattice tiles a cube of side `side`.
    pub fn tiles_box(&self, side: T) -> bool {
        if self.is_constant() {
            return true;
        }
        match &self.period {
            Some(p) => p.iter().all(|&pi| {
                let r = (side / pi).as_f64();
                r >= 1.0 - 1e-12 && (r - r.round()).abs() < 1e-9 * r.max(1.0)
            }),
            None => false,
        }
    }

    /// Snaps every frequency to the reciprocal lattice `2πℤ^d/side`, producing a field
    /// that is exactly periodic on the cube of side `side`.
    pub fn periodized(&self, side: T) -> Self {
        let q = T::TAU() / side;
        let mut const_term = self.const_term.clone();
        let mut modes = Vec::with_capacity(self.modes.len());
        for md in &self.modes {
            let omega: Vec<T> = md.omega.iter().map(|&w| (w / q).round() * q).collect();
            if omega.iter().all(|w| w.is_zero()) {
                // cos(0) = 1, sin(0) = 0
                const_term.axpy(T::one(), &md.cos_amp);
            } else {
                modes.push(TrigMode { omega, ..md.clone() });
            }
        }
        Self { const_term, modes, period: Some(vec![side; self.dim]), ..self.clone() }
    }

    pub fn cast<U: Real>(&self) -> CoefficientField<U> {
        CoefficientField {
            dim: self.dim,
            m: self.m,
            const_term: self.const_term.cast(),
            modes: self
                .modes
                .iter()
                .map(|md| TrigMode {
                    omega: md.omega.iter().map(|w| U::lit(w.as_f64())).collect(),
                    cos_amp: md.cos_amp.cast(),
                    sin_amp: md.sin_amp.cast(),
                })
                .collect(),
            mu: U::lit(self.mu.as_f64()),
            period: self.period.as_ref().map(|p| p.iter().map(|v| U::lit(v.as_f64())).collect()),
        }
    }

    // ----- file format -----

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: FieldFile = serde_json::from_str(s)?;
        file.into_field()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&FieldFile::from_field(self)).expect("field serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let canon = serde_json::to_string(&FieldFile::from_field(self)).expect("field serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

impl<T: Real> TensorField<T> for CoefficientField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn m(&self) -> usize {
        self.m
    }

    fn eval_into(&self, y: &[T], out: &mut [T]) {
        out.copy_from_slice(self.const_term.as_slice());
        for md in &self.modes {
            let (s, c) = md.phase(y).sin_cos();
            for ((o, &ca), &sa) in out.iter_mut().zip(md.cos_amp.as_slice()).zip(md.sin_amp.as_slice()) {
                *o = *o + ca * c + sa * s;
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        let tol = T::lit(1e-14);
        self.const_term.is_symmetric(tol)
            && self.modes.iter().all(|m| m.cos_amp.is_symmetric(tol) && m.sin_amp.is_symmetric(tol))
    }

    fn ellipticity(&self) -> Option<T> {
        Some(self.mu)
    }

    fn certify(&self) -> Result<()> {
        self.check_ellipticity().map(|_| ())
    }
}

/// `y ↦ A(y/ε)`.
pub struct Rescaled<'a, F: ?Sized> {
    inner: &'a F,
    inv_eps: f64,
}

impl<'a, F: ?Sized> Rescaled<'a, F> {
    pub fn new(inner: &'a F, epsilon: f64) -> Self {
        Self { inner, inv_eps: 1.0 / epsilon }
    }
}

impl<T: Real, F: TensorField<T> + ?Sized> TensorField<T> for Rescaled<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn eval_into(&self, y: &[T], out: &mut [T]) {
        let s = T::lit(self.inv_eps);
        let mut buf = [T::zero(); 3];
        for (b, &v) in buf.iter_mut().zip(y) {
            *b = v * s;
        }
        self.inner.eval_into(&buf[..y.len()], out)
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }

    fn ellipticity(&self) -> Option<T> {
        self.inner.ellipticity()
    }

    fn certify(&self) -> Result<()> {
        self.inner.certify()
    }
}

/// A constant tensor viewed as a (trivial) field.
#[derive(Clone, Debug)]
pub struct ConstantTensor<T> {
    pub dim: usize,
    pub m: usize,
    pub value: Tensor<T>,
}

impl<T: Real> TensorField<T> for ConstantTensor<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn m(&self) -> usize {
        self.m
    }

    fn eval_into(&self, _y: &[T], out: &mut [T]) {
        out.copy_from_slice(self.value.as_slice());
    }

    fn is_symmetric(&self) -> bool {
        self.value.is_symmetric(T::lit(1e-14))
    }

    fn certify(&self) -> Result<()> {
        let (lower, upper) = self.value.sym_eig_range();
        if lower > 0.0 {
            Ok(())
        } else {
            Err(Error::NotElliptic { lower, upper, mu: 0.0 })
        }
    }
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Serialize, Deserialize)]
struct ModeFile {
    omega: Vec<f64>,
    cos: Value,
    sin: Value,
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    dim: usize,
    #[serde(default = "one")]
    m: usize,
    mu: f64,
    #[serde(rename = "const")]
    const_term: Value,
    #[serde(default)]
    modes: Vec<ModeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

/// Flattens an arbitrarily nested numeric array in row-major order.
fn flatten(v: &Value, out: &mut Vec<f64>) -> Result<()> {
    match v {
        Value::Number(n) => {
            out.push(n.as_f64().ok_or_else(|| Error::InvalidField("bad number".into()))?);
            Ok(())
        }
        Value::Array(items) => items.iter().try_for_each(|it| flatten(it, out)),
        _ => Err(Error::InvalidField(format!("expected a numeric array, found {v}"))),
    }
}

fn tensor_from_value<T: Real>(v: &Value, side: usize, what: &str) -> Result<Tensor<T>> {
    let mut flat = Vec::new();
    flatten(v, &mut flat)?;
    if flat.len() != side * side {
        return Err(Error::InvalidField(format!("{what}: expected {} entries, found {}", side * side, flat.len())));
    }
    Ok(Tensor::from_vec(side, flat.into_iter().map(T::lit).collect()))
}

fn tensor_to_value<T: Real>(t: &Tensor<T>) -> Value {
    let n = t.side();
    Value::Array(
        (0..n).map(|r| Value::Array((0..n).map(|c| serde_json::json!(t.get(r, c).as_f64())).collect())).collect(),
    )
}

impl FieldFile {
    fn into_field<T: Real>(self) -> Result<CoefficientField<T>> {
        let side = self.dim * self.m;
        let const_term = tensor_from_value(&self.const_term, side, "const")?;
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, md)| {
                Ok(TrigMode {
                    omega: md.omega.iter().map(|&w| T::lit(w)).collect(),
                    cos_amp: tensor_from_value(&md.cos, side, &format!("modes[{k}].cos"))?,
                    sin_amp: tensor_from_value(&md.sin, side, &format!("modes[{k}].sin"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CoefficientField::new(
            self.dim,
            self.m,
            const_term,
            modes,
            T::lit(self.mu),
            self.period.map(|p| p.into_iter().map(T::lit).collect()),
        )
    }

    fn from_field<T: Real>(f: &CoefficientField<T>) -> Self {
        Self {
            dim: f.dim,
            m: f.m,
            mu: f.mu.as_f64(),
            const_term: tensor_to_value(&f.const_term),
            modes: f
                .modes
                .iter()
                .map(|md| ModeFile {
                    omega: md.omega.iter().map(|w| w.as_f64()).collect(),
                    cos: tensor_to_value(&md.cos_amp),
                    sin: tensor_to_value(&md.sin_amp),
                })
                .collect(),
            period: f.period.as_ref().map(|p| p.iter().map(|v| v.as_f64()).collect()),
        }
    }
}
