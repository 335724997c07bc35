//! The closed loop: fit on observational data, then repeatedly choose an
//! intervention, query the environment and update the belief.

mod output;
mod strategy;

pub use output::{read_trace_jsonl, write_summary_csv, write_trace_jsonl, SUMMARY_HEADER};
pub use strategy::{Choice, Strategy};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefConfig, BeliefState, FitOutcome, InterventionSpec, NodeKey, RootModel, Sample, N_MIN};
use crate::dag::{shd, Dag};
use crate::design::{DesignConfig, EvalRecord};
use crate::error::{Error, Result};
use crate::gp::FitBounds;
use crate::math::neg_entropy;
use crate::prior::GraphPrior;
use crate::rng::{derive_seed, TAG_DESIGN, TAG_FIT, TAG_OBS, TAG_OUTCOME};
use crate::scm::{sample_truth, GroundTruthScm};

pub const DEFAULT_CONFIDENCE_STOP: f64 = 0.99;

/// Conditional-model options shared by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default)]
    pub root_model: RootModel,
    #[serde(default)]
    pub fit_bounds: FitBounds,
    #[serde(default = "default_restarts")]
    pub fit_restarts: usize,
}

fn default_n_min() -> usize {
    N_MIN
}

fn default_restarts() -> usize {
    BeliefConfig::default().fit_restarts
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { n_min: N_MIN, root_model: RootModel::default(), fit_bounds: FitBounds::default(), fit_restarts: default_restarts() }
    }
}

impl ModelOptions {
    pub fn belief_config(&self, prior: GraphPrior, seed: u64) -> BeliefConfig {
        BeliefConfig {
            prior,
            n_min: self.n_min,
            root_model: self.root_model,
            fit_bounds: self.fit_bounds,
            fit_restarts: self.fit_restarts,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Ground truth. Absent in external-oracle mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scm: Option<GroundTruthScm>,
    pub n_obs: usize,
    pub max_steps: usize,
    #[serde(default = "default_confidence")]
    pub confidence_stop: f64,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub prior: GraphPrior,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub model: ModelOptions,
    /// Outcomes drawn per intervention.
    #[serde(default = "default_per_step")]
    pub samples_per_step: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE_STOP
}

fn default_per_step() -> usize {
    1
}

impl EpisodeConfig {
    pub fn new(scm: GroundTruthScm, n_obs: usize, max_steps: usize) -> Self {
        Self {
            scm: Some(scm),
            n_obs,
            max_steps,
            confidence_stop: DEFAULT_CONFIDENCE_STOP,
            design: DesignConfig::default(),
            prior: GraphPrior::uniform(),
            strategy: Strategy::Bo,
            model: ModelOptions::default(),
            samples_per_step: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEpisode(m));
        if self.n_obs < self.model.n_min {
            return bad(format!("n_obs = {} is below n_min = {}", self.n_obs, self.model.n_min));
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        if !(self.confidence_stop > 0.5 && self.confidence_stop <= 1.0) {
            return bad(format!("confidence_stop must be in (0.5, 1], got {}", self.confidence_stop));
        }
        if self.samples_per_step < 1 {
            return bad("samples_per_step must be at least 1".into());
        }
        self.design.validate()?;
        if let (Some(scm), Some(ds)) = (&self.scm, &self.design.domains) {
            if ds.len() != scm.d() {
                return bad(format!("{} domains given for {} variables", ds.len(), scm.d()));
            }
        }
        Ok(())
    }
}

/// The environment the agent queries.
pub trait Oracle {
    fn d(&self) -> usize;

    /// One outcome under `spec`. `seed` is unique per (step, draw).
    fn query(&mut self, spec: InterventionSpec, seed: u64) -> Result<Sample>;

    /// The true graph, when known; enables the ground-truth metrics.
    fn truth(&self) -> Option<&Dag> {
        None
    }
}

impl Oracle for GroundTruthScm {
    fn d(&self) -> usize {
        GroundTruthScm::d(self)
    }

    fn query(&mut self, spec: InterventionSpec, seed: u64) -> Result<Sample> {
        sample_truth(self, spec, seed)
    }

    fn truth(&self) -> Option<&Dag> {
        Some(self.graph())
    }
}

/// Pass-through oracle: outcomes come from a callback, e.g. a person
/// running the experiment.
pub struct ExternalOracle<F> {
    d: usize,
    answer: F,
}

impl<F: FnMut(InterventionSpec) -> Result<Sample>> ExternalOracle<F> {
    pub fn new(d: usize, answer: F) -> Self {
        Self { d, answer }
    }
}

impl<F: FnMut(InterventionSpec) -> Result<Sample>> Oracle for ExternalOracle<F> {
    fn d(&self) -> usize {
        self.d
    }

    fn query(&mut self, spec: InterventionSpec, _seed: u64) -> Result<Sample> {
        let s = (self.answer)(spec)?;
        if s.intervention != spec {
            return Err(Error::InvalidSample(format!("outcome reports {:?} but {:?} was requested", s.intervention, spec)));
        }
        s.validate(self.d)?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub p_true: f64,
    pub entropy: f64,
    pub expected_shd: f64,
}

/// Posterior mass on the truth, entropy, and expected SHD to the truth.
pub fn metrics(posterior: &[f64], truth: &Dag, universe: &[Dag]) -> Result<Metrics> {
    if posterior.len() != universe.len() {
        return Err(Error::DimensionMismatch { expected: universe.len(), got: posterior.len() });
    }
    let gi = universe.iter().position(|g| g == truth).ok_or(Error::GraphNotInUniverse)?;
    let mut expected_shd = 0.0;
    for (g, &p) in universe.iter().zip(posterior) {
        if p > 0.0 {
            expected_shd += p * shd(g, truth)? as f64;
        }
    }
    Ok(Metrics { p_true: posterior[gi], entropy: entropy_of(posterior), expected_shd })
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy_of(posterior: &[f64]) -> f64 {
    let logs: Vec<f64> = posterior.iter().map(|p| p.ln()).collect();
    -neg_entropy(&logs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub chosen: InterventionSpec,
    pub eig: Option<f64>,
    pub outcome: Sample,
    /// Further outcomes when more than one is drawn per step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_outcomes: Vec<Sample>,
    pub posterior: Vec<f64>,
    pub entropy: f64,
    pub p_true: Option<f64>,
    pub expected_shd: Option<f64>,
}

/// Belief summary before the first intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub observations: Vec<Sample>,
    pub posterior: Vec<f64>,
    pub entropy: f64,
    pub p_true: Option<f64>,
    pub expected_shd: Option<f64>,
    pub hyperparams: Vec<(NodeKey, crate::gp::GpHyperparams)>,
    pub fits: Vec<(NodeKey, FitOutcome)>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub initial: InitialState,
    pub steps: Vec<StepRecord>,
    /// Objective evaluations behind each step's choice, aligned with `steps`.
    pub diagnostics: Vec<Vec<EvalRecord>>,
    pub universe: Vec<Dag>,
    pub belief: BeliefState,
    /// True when the loop ended on `confidence_stop` rather than `max_steps`.
    pub converged: bool,
}

fn max_prob(posterior: &[f64]) -> f64 {
    posterior.iter().copied().fold(0.0, f64::max)
}

/// Run against the configured ground-truth SCM.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<Episode> {
    let mut scm = cfg.scm.clone().ok_or_else(|| Error::InvalidEpisode("no scm given; external mode needs an oracle".into()))?;
    run_episode_with(cfg, &mut scm)
}

/// Run against any oracle. Deterministic given `cfg.seed` and the oracle.
pub fn run_episode_with(cfg: &EpisodeConfig, oracle: &mut dyn Oracle) -> Result<Episode> {
    cfg.validate()?;
    let d = oracle.d();
    let init_err = |e: Error| Error::Initialization { step: -1, source: Box::new(e) };
    let obs: Vec<Sample> = (0..cfg.n_obs)
        .map(|i| oracle.query(InterventionSpec::observational(), derive_seed(cfg.seed, &[TAG_OBS, i as u64])))
        .collect::<Result<_>>()
        .map_err(init_err)?;
    let bcfg = cfg.model.belief_config(cfg.prior.clone(), derive_seed(cfg.seed, &[TAG_FIT]));
    let (mut belief, fits) = BeliefState::initialize(&obs, &bcfg).map_err(init_err)?;
    if belief.d() != d {
        return Err(init_err(Error::DimensionMismatch { expected: d, got: belief.d() }));
    }
    let universe = belief.universe().to_vec();
    let truth = oracle.truth().cloned();
    let score = |posterior: &[f64]| -> Result<(Option<f64>, Option<f64>)> {
        match &truth {
            Some(g) => {
                let m = metrics(posterior, g, &universe)?;
                Ok((Some(m.p_true), Some(m.expected_shd)))
            }
            None => Ok((None, None)),
        }
    };
    let posterior = belief.posterior();
    let (p_true, expected_shd) = score(&posterior).map_err(init_err)?;
    let initial = InitialState {
        observations: obs,
        entropy: entropy_of(&posterior),
        p_true,
        expected_shd,
        hyperparams: belief.hyperparams().iter().map(|(k, h)| (*k, h.clone())).collect(),
        fits: fits.into_iter().collect(),
        posterior,
    };
    let mut converged = max_prob(&initial.posterior) >= cfg.confidence_stop;
    let mut steps = Vec::new();
    let mut diagnostics = Vec::new();
    let mut t = 0;
    while !converged && t < cfg.max_steps {
        t += 1;
        let seed = derive_seed(cfg.seed, &[TAG_DESIGN, t as u64]);
        let choice = cfg.strategy.choose(&belief, &cfg.design, t, seed, None)?;
        let mut outcomes = (0..cfg.samples_per_step)
            .map(|k| oracle.query(choice.spec, derive_seed(cfg.seed, &[TAG_OUTCOME, t as u64, k as u64])))
            .collect::<Result<Vec<_>>>()?;
        belief = belief.update_all(outcomes.iter().cloned())?;
        let posterior = belief.posterior();
        let (p_true, expected_shd) = score(&posterior)?;
        log::info!("step {t}: {:?} eig={:?} max P = {:.4}", choice.spec.get(), choice.eig, max_prob(&posterior));
        converged = max_prob(&posterior) >= cfg.confidence_stop;
        let outcome = outcomes.remove(0);
        steps.push(StepRecord {
            t,
            chosen: choice.spec,
            eig: choice.eig,
            outcome,
            extra_outcomes: outcomes,
            entropy: entropy_of(&posterior),
            posterior,
            p_true,
            expected_shd,
        });
        diagnostics.push(choice.diagnostics);
    }
    Ok(Episode { initial, steps, diagnostics, universe, belief, converged })
}

/// Independent episodes for each seed, run in parallel.
pub fn sweep(cfg: &EpisodeConfig, seeds: &[u64]) -> Vec<Result<Episode>> {
    seeds.par_iter().map(|&s| run_episode(&EpisodeConfig { seed: s, ..cfg.clone() })).collect()
}

#[cfg(test)]
mod tests;
