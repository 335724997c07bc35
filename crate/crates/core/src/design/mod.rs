//! Choosing the next intervention: Monte-Carlo expected information gain in
//! the graph, maximized per target by GP-UCB over the intervention value.

mod bo;
mod eig;

pub use bo::{maximize_1d, ucb_acquisition, BoEvaluation, BoOutcome, BoSurrogate, GRID_POINTS};
pub use eig::{mc_expected_info_gain, utility, EigEstimate};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, InterventionSpec};
use crate::error::{Error, Result};

/// Closed interval of allowed intervention values, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Domain {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Domain> for [f64; 2] {
    fn from(d: Domain) -> Self {
        [d.lo, d.hi]
    }
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let d = Self { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidDesign(format!("domain [{}, {}] must be finite and nonempty", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `[min, max]` widened by half its width on each side.
    pub fn from_observed(lo: f64, hi: f64) -> Self {
        let w = hi - lo;
        if w > 0.0 {
            Self { lo: lo - 0.5 * w, hi: hi + 0.5 * w }
        } else {
            Self { lo: lo - 1.0, hi: hi + 1.0 }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Monte-Carlo samples per (graph, candidate).
    #[serde(default = "default_m")]
    pub mc_samples: usize,
    /// UCB exploration coefficient.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Objective evaluations per target, including the three seed points.
    #[serde(default = "default_budget")]
    pub bo_budget: usize,
    /// Per-node intervention domains; derived from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<Vec<Domain>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_m() -> usize {
    64
}

fn default_beta() -> f64 {
    2.0
}

fn default_budget() -> usize {
    12
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self { mc_samples: default_m(), beta: default_beta(), bo_budget: default_budget(), domains: None, seed: 0 }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < 1 {
            return Err(Error::InvalidDesign("mc_samples must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidDesign(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.bo_budget < 2 {
            return Err(Error::InvalidDesign(format!("bo_budget must be at least 2, got {}", self.bo_budget)));
        }
        if let Some(ds) = &self.domains {
            for d in ds {
                d.validate()?;
            }
        }
        Ok(())
    }

    pub fn domain(&self, j: usize, belief: &BeliefState) -> Result<Domain> {
        match &self.domains {
            Some(ds) => ds.get(j).copied().ok_or(Error::DimensionMismatch { expected: belief.d(), got: ds.len() }),
            None => {
                let (lo, hi) = belief.observed_ranges()[j];
                Ok(Domain::from_observed(lo, hi))
            }
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// One objective evaluation, in the order it was made.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub target: usize,
    pub x: f64,
    pub eig: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub target: usize,
    pub value: f64,
    pub eig: f64,
    pub diagnostics: Vec<EvalRecord>,
    /// Set when a deadline cut the search short.
    pub budget_exhausted: bool,
}

impl Recommendation {
    pub fn intervention(&self) -> InterventionSpec {
        InterventionSpec::intervene(self.target, self.value)
    }
}

/// Highest evaluated objective; ties go to the lowest target, then lowest x.
fn pick_best(diagnostics: &[EvalRecord]) -> Option<EvalRecord> {
    diagnostics.iter().copied().reduce(|best, e| {
        let better = e.eig > best.eig
            || (e.eig == best.eig && (e.target < best.target || (e.target == best.target && e.x < best.x)));
        if better {
            e
        } else {
            best
        }
    })
}

/// GP-UCB over each target's domain with the MC-EIG objective.
pub fn optimize_intervention(belief: &BeliefState, cfg: &DesignConfig) -> Result<Recommendation> {
    optimize_intervention_until(belief, cfg, None)
}

/// As [`optimize_intervention`], returning the best so far once `deadline`
/// passes (at least one evaluation is always made).
pub fn optimize_intervention_until(
    belief: &BeliefState,
    cfg: &DesignConfig,
    deadline: Option<Instant>,
) -> Result<Recommendation> {
    search(belief, cfg, deadline, |domain, objective, deadline| maximize_1d(domain, cfg.bo_budget, cfg.beta, objective, deadline))
}

/// Exhaustive alternative: evaluate the objective on a uniform grid per target.
pub fn grid_search_intervention(belief: &BeliefState, cfg: &DesignConfig, points: usize) -> Result<Recommendation> {
    search(belief, cfg, None, |domain, objective, _| {
        let xs: Vec<f64> = if domain.width() == 0.0 {
            vec![domain.lo]
        } else {
            (0..points).map(|k| bo::grid_point(domain, k, points)).collect()
        };
        let mut out = BoOutcome::default();
        for x in xs {
            match objective(x) {
                Ok(e) => out.evaluations.push(BoEvaluation { x, value: e.value, std_error: e.std_error }),
                Err(err) => out.errors.push(err),
            }
        }
        out
    })
}

fn search<F>(belief: &BeliefState, cfg: &DesignConfig, deadline: Option<Instant>, mut per_target: F) -> Result<Recommendation>
where
    F: FnMut(Domain, &mut dyn FnMut(f64) -> Result<EigEstimate>, Option<Instant>) -> BoOutcome,
{
    cfg.validate()?;
    if belief.d() < 2 {
        return Err(Error::InvalidDesign("need at least two variables to choose an intervention".into()));
    }
    let mut diagnostics = Vec::new();
    let mut failures = Vec::new();
    let mut exhausted = false;
    for j in 0..belief.d() {
        let domain = cfg.domain(j, belief)?;
        domain.validate()?;
        let mut objective = |x: f64| mc_expected_info_gain(belief, j, x, cfg);
        // later targets still get one evaluation after the deadline
        let outcome = per_target(domain, &mut objective, deadline);
        exhausted |= outcome.deadline_hit;
        if outcome.evaluations.is_empty() {
            let msg = outcome.errors.first().map_or("no evaluations".to_string(), |e| e.to_string());
            log::warn!("target {j} skipped: {msg}");
            failures.push(format!("target {j}: {msg}"));
            continue;
        }
        for e in outcome.evaluations {
            let order = diagnostics.len();
            diagnostics.push(EvalRecord { target: j, x: e.x, eig: e.value, order });
        }
    }
    let best = pick_best(&diagnostics).ok_or_else(|| Error::AllTargetsFailed(failures.join("; ")))?;
    Ok(Recommendation { target: best.target, value: best.x, eig: best.eig, diagnostics, budget_exhausted: exhausted })
}
