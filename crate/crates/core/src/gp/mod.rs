//! Gaussian-process regression with a squared-exponential kernel and a zero
//! mean function.
//!
//! [`GpPosterior`] is an immutable snapshot of a conditioned GP. Appending an
//! observation borders the Cholesky factor with one new row, which costs
//! `O(n²)` and yields the one-step predictive log density as a by-product.

mod fit;

pub use fit::{fit_hyperparams, FitBounds};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::math::LN_2PI;

/// Diagonal jitter tried, in order, when `K + σ²I` fails to factor.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub signal_variance: f64,
    pub inverse_lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn new(signal_variance: f64, inverse_lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let h = Self { signal_variance, inverse_lengthscales, noise_variance };
        h.validate()?;
        Ok(h)
    }

    /// Fallback used when type-2 ML fitting is impossible or fails.
    pub fn defaults(p: usize) -> Self {
        Self { signal_variance: 1.0, inverse_lengthscales: vec![1.0; p], noise_variance: 0.1 }
    }

    pub fn dim(&self) -> usize {
        self.inverse_lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.signal_variance) || !ok(self.noise_variance) || !self.inverse_lengthscales.iter().all(|&v| ok(v)) {
            return Err(Error::InvalidHyperparams(format!("all entries must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn to_log_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.signal_variance.ln());
        v.extend(self.inverse_lengthscales.iter().map(|x| x.ln()));
        v.push(self.noise_variance.ln());
        v
    }

    pub(crate) fn from_log_params(v: &[f64]) -> Self {
        let p = v.len() - 2;
        Self {
            signal_variance: v[0].exp(),
            inverse_lengthscales: v[1..=p].iter().map(|x| x.exp()).collect(),
            noise_variance: v[p + 1].exp(),
        }
    }
}

/// `n` input rows of dimension `p` (row-major) with their targets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GpDataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl GpDataset {
    pub fn empty(dim: usize) -> Self {
        Self { dim, inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn new(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: targets.len() });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut d = Self::empty(dim);
        for (r, &y) in rows.iter().zip(targets) {
            d.push(r, y)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !y.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSample("non-finite GP training value".into()));
        }
        self.inputs.extend_from_slice(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

#[inline]
pub(crate) fn se(x: &[f64], x2: &[f64], h: &GpHyperparams) -> f64 {
    let r: f64 = x
        .iter()
        .zip(x2)
        .zip(&h.inverse_lengthscales)
        .map(|((a, b), nu)| nu * (a - b) * (a - b))
        .sum();
    h.signal_variance * (-r).exp()
}

/// `λ exp(-Σ ν_i (x_i - x2_i)²)`.
pub fn kernel_se(x: &[f64], x2: &[f64], h: &GpHyperparams) -> Result<f64> {
    if x.len() != h.dim() || x2.len() != h.dim() {
        let got = if x.len() != h.dim() { x.len() } else { x2.len() };
        return Err(Error::DimensionMismatch { expected: h.dim(), got });
    }
    Ok(se(x, x2, h))
}

/// Row-major Gram matrix `K` (no noise term).
pub fn gram(data: &GpDataset, h: &GpHyperparams) -> Vec<f64> {
    let n = data.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = se(data.input(i), data.input(j), h);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn check_dims(data: &GpDataset, h: &GpHyperparams) -> Result<()> {
    h.validate()?;
    if data.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: data.dim() });
    }
    Ok(())
}

/// Factor `K + (σ² + jitter) I`, climbing the jitter ladder on failure.
fn factor_noisy(data: &GpDataset, h: &GpHyperparams) -> Result<(Cholesky, f64)> {
    let n = data.len();
    let mut a = gram(data, h);
    for i in 0..n {
        a[i * n + i] += h.noise_variance;
    }
    if let Some(l) = Cholesky::factor(&a, n) {
        return Ok((l, 0.0));
    }
    let mut added = 0.0;
    for &jitter in &JITTER_LADDER {
        for i in 0..n {
            a[i * n + i] += jitter - added;
        }
        added = jitter;
        if let Some(l) = Cholesky::factor(&a, n) {
            log::debug!("kernel matrix needed jitter {jitter:e}");
            return Ok((l, jitter));
        }
    }
    Err(Error::NotPositiveDefinite { ladder: JITTER_LADDER.to_vec() })
}

/// `-½ yᵀ(K+σ²I)⁻¹y - ½ log|K+σ²I| - (n/2) log 2π`; zero for an empty dataset.
pub fn log_marginal_likelihood(data: &GpDataset, h: &GpHyperparams) -> Result<f64> {
    Ok(GpPosterior::new(data.clone(), h.clone())?.log_evidence())
}

/// Predictive distribution of the latent function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictive {
    pub mean: f64,
    /// Latent-function variance; add the noise variance for an observation.
    pub variance_f: f64,
}

pub fn predictive(data: &GpDataset, h: &GpHyperparams, x_star: &[f64]) -> Result<Predictive> {
    if x_star.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: x_star.len() });
    }
    Ok(GpPosterior::new(data.clone(), h.clone())?.predict(x_star))
}

/// Evidence from the factor and whitened targets. Both the batch and the
/// bordered routes go through here rather than accumulating increments.
fn evidence(chol: &Cholesky, white: &[f64]) -> f64 {
    let quad: f64 = white.iter().map(|w| w * w).sum();
    -0.5 * quad - 0.5 * chol.log_det() - 0.5 * white.len() as f64 * LN_2PI
}

/// A GP conditioned on a dataset: factor, whitened targets and evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    hyper: GpHyperparams,
    data: GpDataset,
    chol: Cholesky,
    /// `L⁻¹ y`.
    white: Vec<f64>,
    jitter: f64,
    log_evidence: f64,
}

/// Result of bordering a posterior with one more observation.
#[derive(Debug, Clone)]
pub struct Extension {
    v: Vec<f64>,
    delta: f64,
    white_new: f64,
    /// `log p(y_new | previous data)`.
    pub log_density: f64,
}

impl GpPosterior {
    pub fn new(data: GpDataset, hyper: GpHyperparams) -> Result<Self> {
        check_dims(&data, &hyper)?;
        let (chol, jitter) = factor_noisy(&data, &hyper)?;
        let white = chol.forward_solve(data.targets());
        let log_evidence = evidence(&chol, &white);
        Ok(Self { hyper, data, chol, white, jitter, log_evidence })
    }

    pub fn empty(hyper: GpHyperparams) -> Result<Self> {
        hyper.validate()?;
        let dim = hyper.dim();
        Ok(Self {
            hyper,
            data: GpDataset::empty(dim),
            chol: Cholesky::empty(),
            white: Vec::new(),
            jitter: 0.0,
            log_evidence: 0.0,
        })
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &GpDataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        (0..self.data.len()).map(|i| se(self.data.input(i), x, &self.hyper)).collect()
    }

    /// `(mean, variance_f)` at `x`; `variance_f` is clamped at zero.
    pub fn predict(&self, x: &[f64]) -> Predictive {
        let kss = self.hyper.signal_variance;
        if self.data.is_empty() {
            return Predictive { mean: 0.0, variance_f: kss };
        }
        let v = self.chol.forward_solve(&self.cross(x));
        let mean = v.iter().zip(&self.white).map(|(a, b)| a * b).sum();
        let variance_f = (kss - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        Predictive { mean, variance_f }
    }

    /// Border the factor with `(x, y)` without materializing the new snapshot.
    /// `None` if the bordered matrix is not numerically positive definite.
    pub fn extension(&self, x: &[f64], y: f64) -> Option<Extension> {
        let c = self.hyper.signal_variance + self.hyper.noise_variance + self.jitter;
        let (v, delta) = self.chol.extension_row(&self.cross(x), c)?;
        let mean: f64 = v.iter().zip(&self.white).map(|(a, b)| a * b).sum();
        let white_new = (y - mean) / delta;
        let log_density = -0.5 * white_new * white_new - delta.ln() - 0.5 * LN_2PI;
        Some(Extension { v, delta, white_new, log_density })
    }

    /// `log p(y | x, data)`; the evidence increment from appending `(x, y)`.
    pub fn log_predictive_density(&self, x: &[f64], y: f64) -> Result<f64> {
        match self.extension(x, y) {
            Some(e) => Ok(e.log_density),
            None => Ok(self.appended(x, y)?.log_evidence - self.log_evidence),
        }
    }

    /// New snapshot with `(x, y)` appended. Falls back to a from-scratch
    /// factorization (with the jitter ladder) if bordering breaks down.
    pub fn appended(&self, x: &[f64], y: f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(x, y)?;
        match self.extension(x, y) {
            Some(e) => {
                let chol = self.chol.extended(&e.v, e.delta);
                let mut white = self.white.clone();
                white.push(e.white_new);
                let log_evidence = evidence(&chol, &white);
                Ok(Self { hyper: self.hyper.clone(), data, chol, white, jitter: self.jitter, log_evidence })
            }
            None => Self::new(data, self.hyper.clone()),
        }
    }
}
