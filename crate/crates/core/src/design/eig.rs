use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DesignConfig;
use crate::belief::{BeliefState, Intervention};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, neg_entropy};
use crate::rng::{stream, TAG_DESIGN};

/// Tolerance on the log-normalizer accepted by [`utility`].
const NORMALIZATION_TOL: f64 = 1e-6;

/// Negative Shannon entropy of a normalized log-posterior (nats).
pub fn utility(log_posterior: &[f64]) -> Result<f64> {
    let z = log_sum_exp(log_posterior);
    if !(z.abs() <= NORMALIZATION_TOL) {
        return Err(Error::Unnormalized(z));
    }
    Ok(neg_entropy(log_posterior))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `sum_G P(G) E_{x ~ P(.|G, do(X_j = x))} log P(G | data, x)`.
///
/// The current posterior's entropy is constant across candidates and is not
/// subtracted. Draws for (graph, m) come from streams that do not depend on
/// `x`, so estimates at nearby candidates share their randomness.
pub fn mc_expected_info_gain(belief: &BeliefState, j: usize, x: f64, cfg: &DesignConfig) -> Result<EigEstimate> {
    if j >= belief.d() {
        return Err(Error::DimensionMismatch { expected: belief.d(), got: j + 1 });
    }
    let domain = cfg.domain(j, belief)?;
    if !domain.contains(x) {
        return Err(Error::OutsideDomain { target: j, x, lo: domain.lo, hi: domain.hi });
    }
    if cfg.mc_samples == 0 {
        return Err(Error::InvalidDesign("mc_samples must be at least 1".into()));
    }
    let m = cfg.mc_samples;
    let iv = Some(Intervention { target: j, value: x });
    let support: Vec<(usize, f64)> = belief
        .log_posterior()
        .iter()
        .enumerate()
        .map(|(g, &lp)| (g, lp.exp()))
        .filter(|&(_, p)| p > 0.0)
        .collect();

    let per_graph: Vec<Result<(f64, f64)>> = support
        .par_iter()
        .map(|&(g, p)| {
            let mut scratch = Vec::with_capacity(belief.universe().len());
            let mut vals = Vec::with_capacity(m);
            for k in 0..m {
                let mut rng = stream(cfg.seed, &[TAG_DESIGN, j as u64, g as u64, k as u64]);
                let centered = belief.sample_centered(g, iv, &mut rng);
                let deltas = belief.evidence_deltas(&centered, Some(j))?;
                vals.push(belief.hypothetical_log_posterior(g, &deltas, &mut scratch));
            }
            let mean = vals.iter().sum::<f64>() / m as f64;
            let var = if m > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            Ok((p * mean, p * p * var))
        })
        .collect();

    let mut value = 0.0;
    let mut var = 0.0;
    for r in per_graph {
        let (v, s) = r?;
        value += v;
        var += s;
    }
    if !value.is_finite() {
        return Err(Error::InvalidDesign(format!("non-finite information gain at target {j}, x = {x}")));
    }
    Ok(EigEstimate { value, std_error: (var / m as f64).sqrt() })
}
