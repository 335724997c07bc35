//! Conjugate Normal–Inverse-Gamma model for parentless nodes.

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_gamma, student_t_ln_pdf, LN_2PI};

/// Prior `σ² ~ IG(α0, β0)`, `μ | σ² ~ N(μ0, σ²/κ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootModel {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for RootModel {
    fn default() -> Self {
        Self { mu0: 0.0, kappa0: 1.0, alpha0: 2.0, beta0: 1.0 }
    }
}

impl RootModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !self.mu0.is_finite() || !ok(self.kappa0) || !ok(self.alpha0) || !ok(self.beta0) {
            return Err(Error::InvalidHyperparams(format!("root model needs finite mu0 and positive kappa0, alpha0, beta0: {self:?}")));
        }
        Ok(())
    }

    pub fn prior_posterior(&self) -> NigPosterior {
        NigPosterior { mu: self.mu0, kappa: self.kappa0, alpha: self.alpha0, beta: self.beta0, n: 0, log_evidence: 0.0 }
    }

    /// Closed-form log marginal likelihood of `ys`, computed in one batch.
    pub fn log_evidence(&self, ys: &[f64]) -> f64 {
        if ys.is_empty() {
            return 0.0;
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
        let kn = self.kappa0 + n;
        let an = self.alpha0 + 0.5 * n;
        let bn = self.beta0 + 0.5 * ss + self.kappa0 * n * (mean - self.mu0).powi(2) / (2.0 * kn);
        ln_gamma(an) - ln_gamma(self.alpha0) + self.alpha0 * self.beta0.ln() - an * bn.ln()
            + 0.5 * (self.kappa0 / kn).ln()
            - 0.5 * n * LN_2PI
    }

    pub fn posterior(&self, ys: &[f64]) -> NigPosterior {
        ys.iter().fold(self.prior_posterior(), |p, &y| p.appended(y))
    }
}

/// Posterior parameters after `n` observations, with the accumulated evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPosterior {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub log_evidence: f64,
}

impl NigPosterior {
    /// Student-t posterior predictive: `(dof, loc, scale²)`.
    pub fn predictive(&self) -> (f64, f64, f64) {
        (2.0 * self.alpha, self.mu, self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa))
    }

    pub fn log_predictive_density(&self, y: f64) -> f64 {
        let (dof, loc, s2) = self.predictive();
        student_t_ln_pdf(y, dof, loc, s2)
    }

    pub fn appended(&self, y: f64) -> Self {
        let k1 = self.kappa + 1.0;
        Self {
            mu: (self.kappa * self.mu + y) / k1,
            kappa: k1,
            alpha: self.alpha + 0.5,
            beta: self.beta + self.kappa * (y - self.mu).powi(2) / (2.0 * k1),
            n: self.n + 1,
            log_evidence: self.log_evidence + self.log_predictive_density(y),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (dof, loc, s2) = self.predictive();
        let t: f64 = StudentT::new(dof).expect("positive dof").sample(rng);
        loc + s2.sqrt() * t
    }
}
