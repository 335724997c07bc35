//! Type-2 maximum likelihood: multi-start Nelder–Mead over log-parameters,
//! projected onto the box of allowed values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GpDataset, GpHyperparams, GpPosterior};
use crate::error::{Error, Result};
use crate::rng;

/// Minimum dataset size for fitting.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub signal_variance: (f64, f64),
    pub inverse_lengthscale: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        Self { signal_variance: (1e-3, 1e3), inverse_lengthscale: (1e-3, 1e3), noise_variance: (1e-6, 1e2) }
    }
}

impl FitBounds {
    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.signal_variance, self.inverse_lengthscale, self.noise_variance] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidHyperparams(format!("bad bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    /// Log-space box for a `p`-dimensional input.
    pub(crate) fn log_box(&self, p: usize) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut v = vec![ln(self.signal_variance)];
        v.extend(std::iter::repeat_n(ln(self.inverse_lengthscale), p));
        v.push(ln(self.noise_variance));
        v
    }
}

/// Negative log marginal likelihood at log-parameters; `+inf` where the
/// kernel matrix cannot be factored.
pub(crate) fn neg_lml(data: &GpDataset, logp: &[f64]) -> f64 {
    let h = GpHyperparams::from_log_params(logp);
    match GpPosterior::new(data.clone(), h) {
        Ok(p) if p.log_evidence().is_finite() => -p.log_evidence(),
        _ => f64::INFINITY,
    }
}

/// Maximize the log marginal likelihood within `bounds`.
///
/// Starts from the clamped defaults plus `restarts` log-uniform random
/// points; the result is never worse than any start. Deterministic in `seed`.
pub fn fit_hyperparams(data: &GpDataset, bounds: &FitBounds, restarts: usize, seed: u64) -> Result<GpHyperparams> {
    if data.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPointsToFit { needed: MIN_FIT_POINTS, got: data.len() });
    }
    bounds.validate()?;
    let p = data.dim();
    let bx = log_box(bounds, p);
    let mut rng = rng::stream(seed, &[rng::TAG_FIT]);

    let mut starts = vec![project(&GpHyperparams::defaults(p).to_log_params(), &bx)];
    for _ in 0..restarts {
        starts.push(bx.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect());
    }

    let f = |x: &[f64]| neg_lml(data, x);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, fx) = polish(&f, s, &bx);
        if best.as_ref().is_none_or(|(_, fb)| fx < *fb) {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.expect("at least one start");
    if !fx.is_finite() {
        return Err(Error::NotPositiveDefinite { ladder: super::JITTER_LADDER.to_vec() });
    }
    Ok(GpHyperparams::from_log_params(&x))
}

fn log_box(bounds: &FitBounds, p: usize) -> Vec<(f64, f64)> {
    bounds.log_box(p)
}

fn project(x: &[f64], bx: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bx).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect()
}

/// Nelder–Mead restarted from its own optimum until it stops improving.
fn polish(f: &impl Fn(&[f64]) -> f64, x0: Vec<f64>, bx: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let (mut x, mut fx) = nelder_mead(f, x0, bx, 1.0);
    for _ in 0..4 {
        let (y, fy) = nelder_mead(f, x.clone(), bx, 0.1);
        let improved = fy < fx - 1e-10;
        if fy <= fx {
            x = y;
            fx = fy;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

fn nelder_mead(f: &impl Fn(&[f64]) -> f64, x0: Vec<f64>, bx: &[(f64, f64)], step: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = f(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        // step inward if the vertex would leave the box
        x[i] = if x[i] + step <= bx[i].1 { x[i] + step } else { x[i] - step };
        let x = project(&x, bx);
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let max_iter = 400 * n;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (fw - fb).abs() < 1e-11 && size < 1e-7 {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let x: Vec<f64> = centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect();
            project(&x, bx)
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fx = f(&x);
                    *v = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
