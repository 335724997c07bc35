use std::time::Instant;

use super::{Domain, EigEstimate};
use crate::error::{Error, Result};
use crate::gp::{GpDataset, GpHyperparams, GpPosterior};
use crate::math::mean_var;

/// Candidates scored by the acquisition at each step, endpoints included.
pub const GRID_POINTS: usize = 512;

const FALLBACK_NOISE: f64 = 1e-4;

pub(crate) fn grid_point(domain: Domain, k: usize, points: usize) -> f64 {
    if points <= 1 {
        return domain.midpoint();
    }
    if k + 1 == points {
        return domain.hi;
    }
    domain.lo + domain.width() * k as f64 / (points - 1) as f64
}

/// 1-D GP surrogate of a noisy objective.
///
/// Hyperparameters are set from the evaluations rather than fitted: signal
/// variance from the spread of the values, lengthscale an eighth of the
/// domain, noise from the reported standard errors. Targets are centered on
/// their mean.
#[derive(Debug, Clone)]
pub struct BoSurrogate {
    domain: Domain,
    xs: Vec<f64>,
    values: Vec<f64>,
    std_errors: Vec<f64>,
    offset: f64,
    posterior: GpPosterior,
}

impl BoSurrogate {
    pub fn new(domain: Domain) -> Result<Self> {
        domain.validate()?;
        let hyper = Self::hyperparams(domain, &[], &[])?;
        Ok(Self { domain, xs: vec![], values: vec![], std_errors: vec![], offset: 0.0, posterior: GpPosterior::empty(hyper)? })
    }

    fn hyperparams(domain: Domain, values: &[f64], std_errors: &[f64]) -> Result<GpHyperparams> {
        let signal = if values.len() >= 2 {
            let (_, v) = mean_var(values);
            if v > 0.0 && v.is_finite() {
                v
            } else {
                1.0
            }
        } else {
            1.0
        };
        let inv_ls = if domain.width() > 0.0 { (domain.width() / 8.0).powi(-2) } else { 1.0 };
        let se2: Vec<f64> = std_errors.iter().filter(|s| s.is_finite()).map(|s| s * s).collect();
        let noise = if se2.is_empty() {
            FALLBACK_NOISE
        } else {
            let m = se2.iter().sum::<f64>() / se2.len() as f64;
            if m > 0.0 {
                m
            } else {
                FALLBACK_NOISE
            }
        };
        GpHyperparams::new(signal, vec![inv_ls], noise)
    }

    /// Record an evaluation. `std_error` of `None` means unknown.
    pub fn add(&mut self, x: f64, value: f64, std_error: Option<f64>) -> Result<()> {
        if !value.is_finite() || !x.is_finite() {
            return Err(Error::InvalidDesign(format!("non-finite evaluation ({x}, {value})")));
        }
        self.xs.push(x);
        self.values.push(value);
        self.std_errors.push(std_error.unwrap_or(f64::NAN));
        let hyper = Self::hyperparams(self.domain, &self.values, &self.std_errors)?;
        self.offset = self.values.iter().sum::<f64>() / self.values.len() as f64;
        let rows: Vec<Vec<f64>> = self.xs.iter().map(|&x| vec![x]).collect();
        let ys: Vec<f64> = self.values.iter().map(|v| v - self.offset).collect();
        self.posterior = GpPosterior::new(GpDataset::new(&rows, &ys)?, hyper)?;
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn hyper(&self) -> &GpHyperparams {
        self.posterior.hyper()
    }

    /// Posterior mean and standard deviation of the latent objective.
    pub fn mean_sd(&self, x: f64) -> (f64, f64) {
        let p = self.posterior.predict(&[x]);
        (self.offset + p.mean, p.variance_f.max(0.0).sqrt())
    }
}

/// `mu(x) + beta * sigma(x)`.
pub fn ucb_acquisition(surrogate: &BoSurrogate, x: f64, beta: f64) -> f64 {
    let (mu, sd) = surrogate.mean_sd(x);
    mu + beta * sd
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoEvaluation {
    pub x: f64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BoOutcome {
    /// Successful evaluations in order.
    pub evaluations: Vec<BoEvaluation>,
    pub errors: Vec<Error>,
    pub deadline_hit: bool,
}

impl BoOutcome {
    /// Highest value; ties go to the lowest x.
    pub fn best(&self) -> Option<BoEvaluation> {
        self.evaluations.iter().copied().reduce(|b, e| if e.value > b.value || (e.value == b.value && e.x < b.x) { e } else { b })
    }
}

fn acquisition_argmax(s: &BoSurrogate, beta: f64) -> f64 {
    let d = s.domain();
    let mut best = (f64::NEG_INFINITY, d.lo);
    for k in 0..GRID_POINTS {
        let x = grid_point(d, k, GRID_POINTS);
        let a = ucb_acquisition(s, x, beta);
        if a > best.0 {
            best = (a, x);
        }
    }
    best.1
}

/// GP-UCB maximization of a noisy 1-D objective on `domain`.
///
/// The endpoints and midpoint are evaluated first, then the acquisition
/// maximizer over a uniform grid until `budget` evaluations are spent.
/// Failed evaluations are recorded and skipped. After `deadline` no new
/// evaluation starts, except that the first one always runs.
pub fn maximize_1d(
    domain: Domain,
    budget: usize,
    beta: f64,
    objective: &mut dyn FnMut(f64) -> Result<EigEstimate>,
    deadline: Option<Instant>,
) -> BoOutcome {
    let mut out = BoOutcome::default();
    let mut surrogate = match BoSurrogate::new(domain) {
        Ok(s) => s,
        Err(e) => {
            out.errors.push(e);
            return out;
        }
    };
    let degenerate = domain.width() == 0.0;
    let seeds: Vec<f64> = if degenerate { vec![domain.lo] } else { vec![domain.lo, domain.hi, domain.midpoint()] };
    let mut spent = 0;
    let mut eval = |x: f64, out: &mut BoOutcome, s: &mut BoSurrogate, spent: &mut usize| -> bool {
        if *spent > 0 && deadline.is_some_and(|t| Instant::now() >= t) {
            out.deadline_hit = true;
            return false;
        }
        *spent += 1;
        match objective(x) {
            Ok(e) => {
                if let Err(err) = s.add(x, e.value, Some(e.std_error)) {
                    out.errors.push(err);
                } else {
                    out.evaluations.push(BoEvaluation { x, value: e.value, std_error: e.std_error });
                }
            }
            Err(err) => out.errors.push(err),
        }
        true
    };
    for &x in seeds.iter().take(budget.max(1)) {
        if !eval(x, &mut out, &mut surrogate, &mut spent) {
            return out;
        }
    }
    if degenerate {
        return out;
    }
    while spent < budget {
        let x = acquisition_argmax(&surrogate, beta);
        if !eval(x, &mut out, &mut surrogate, &mut spent) {
            break;
        }
    }
    out
}
