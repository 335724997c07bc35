//! Human-in-the-loop sessions as an append-only event history.
//!
//! A [`Session`] is a pure function of its events: replaying them from
//! scratch gives the same belief, revision and pending recommendation.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::agent::{entropy_of, ModelOptions, DEFAULT_CONFIDENCE_STOP};
use crate::belief::{BeliefState, Curve, InterventionSpec, Sample};
use crate::dag::Dag;
use crate::design::{optimize_intervention_until, DesignConfig, EvalRecord};
use crate::error::{Error, Result};
use crate::prior::GraphPrior;
use crate::rng::{derive_seed, TAG_DESIGN, TAG_FIT};

pub const CURVE_POINTS: usize = 200;
pub const DEFAULT_TIME_BUDGET_SECS: f64 = 30.0;

/// Body of a session-creation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub d: usize,
    /// Observational rows, each of length `d`.
    pub observations: Vec<Vec<f64>>,
    #[serde(default)]
    pub prior: GraphPrior,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default = "default_confidence")]
    pub confidence_stop: f64,
    /// Wall-clock limit for one recommendation.
    #[serde(default = "default_budget")]
    pub time_budget_secs: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE_STOP
}

fn default_budget() -> f64 {
    DEFAULT_TIME_BUDGET_SECS
}

impl SessionConfig {
    pub fn new(d: usize, observations: Vec<Vec<f64>>) -> Self {
        Self {
            d,
            observations,
            prior: GraphPrior::uniform(),
            design: DesignConfig::default(),
            model: ModelOptions::default(),
            confidence_stop: DEFAULT_CONFIDENCE_STOP,
            time_budget_secs: DEFAULT_TIME_BUDGET_SECS,
            seed: 0,
        }
    }

    fn samples(&self) -> Result<Vec<Sample>> {
        self.observations
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != self.d {
                    return Err(Error::InvalidSample(format!("observations[{i}] has {} values, expected d = {}", row.len(), self.d)));
                }
                Sample::observational(row.clone()).map_err(|e| Error::InvalidSample(format!("observations[{i}]: {e}")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.d > crate::dag::MAX_NODES {
            return Err(Error::DimensionOutOfRange { d: self.d, max: crate::dag::MAX_NODES });
        }
        if !(self.confidence_stop > 0.5 && self.confidence_stop <= 1.0) {
            return Err(Error::InvalidEpisode(format!("confidence_stop must be in (0.5, 1], got {}", self.confidence_stop)));
        }
        if !(self.time_budget_secs > 0.0 && self.time_budget_secs.is_finite()) {
            return Err(Error::InvalidEpisode(format!("time_budget_secs must be positive, got {}", self.time_budget_secs)));
        }
        if let Some(ds) = &self.design.domains {
            if ds.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: ds.len() });
            }
        }
        self.design.validate()?;
        self.samples()?;
        Ok(())
    }
}

/// What a recommendation proposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationView {
    pub target: usize,
    pub value: f64,
    pub eig: f64,
    pub diagnostics: Vec<EvalRecord>,
    pub budget_exhausted: bool,
    /// Set when the belief already meets `confidence_stop`.
    pub advisory: Option<String>,
    /// Index of this recommendation within the session.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created { id: String, config: SessionConfig },
    Recommended { recommendation: RecommendationView },
    Observed { sample: Sample },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: usize,
    pub performed: Sample,
    /// The pending recommendation at the time, which the experimenter may
    /// not have followed.
    pub recommended: Option<InterventionSpec>,
    pub posterior: Vec<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    belief: BeliefState,
    history: Vec<HistoryEntry>,
    pending: Option<RecommendationView>,
    revision: u64,
    recommendations: u64,
    initial_entropy: f64,
}

const CONVERGED: &str = "belief converged";

impl Session {
    pub fn create(id: impl Into<String>, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let obs = config.samples()?;
        let bcfg = config.model.belief_config(config.prior.clone(), derive_seed(config.seed, &[TAG_FIT]));
        let (belief, _) = BeliefState::initialize(&obs, &bcfg)?;
        let initial_entropy = belief.entropy();
        Ok(Self {
            id: id.into(),
            config,
            belief,
            history: vec![],
            pending: None,
            revision: 0,
            recommendations: 0,
            initial_entropy,
        })
    }

    /// Rebuild from an event history.
    pub fn replay(events: &[SessionEvent]) -> Result<Self> {
        let Some(SessionEvent::Created { id, config }) = events.first() else {
            return Err(Error::Parse("event log must start with a created event".into()));
        };
        let mut s = Self::create(id.clone(), config.clone())?;
        for (k, e) in events.iter().enumerate().skip(1) {
            match e {
                SessionEvent::Created { .. } => return Err(Error::Parse(format!("event {k}: duplicate created event"))),
                SessionEvent::Recommended { recommendation } => s.set_pending(recommendation.clone()),
                SessionEvent::Observed { sample } => {
                    s.observe(sample.clone())?;
                }
            }
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn pending(&self) -> Option<&RecommendationView> {
        self.pending.as_ref()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn converged(&self) -> bool {
        self.belief.posterior().iter().any(|&p| p >= self.config.confidence_stop)
    }

    /// Optimize against the current belief. Each call uses a fresh seed
    /// stream. Does not change the session; commit with [`Session::set_pending`].
    pub fn compute_recommendation(&self) -> Result<RecommendationView> {
        let seq = self.recommendations;
        let seed = derive_seed(self.config.seed, &[TAG_DESIGN, self.history.len() as u64, seq]);
        let deadline = Instant::now() + Duration::from_secs_f64(self.config.time_budget_secs);
        let r = optimize_intervention_until(&self.belief, &self.config.design.with_seed(seed), Some(deadline))?;
        Ok(RecommendationView {
            target: r.target,
            value: r.value,
            eig: r.eig,
            diagnostics: r.diagnostics,
            budget_exhausted: r.budget_exhausted,
            advisory: self.converged().then(|| CONVERGED.to_string()),
            seq,
        })
    }

    /// Store a recommendation as pending, replacing any earlier one.
    pub fn set_pending(&mut self, r: RecommendationView) {
        self.recommendations = self.recommendations.max(r.seq + 1);
        self.pending = Some(r);
    }

    /// Validate and apply an outcome. Clears the pending recommendation and
    /// bumps the revision by one.
    pub fn observe(&mut self, sample: Sample) -> Result<&HistoryEntry> {
        sample.validate(self.config.d)?;
        let belief = self.belief.update(sample.clone())?;
        let posterior = belief.posterior();
        let recommended = self.pending.take().map(|r| InterventionSpec::intervene(r.target, r.value));
        self.belief = belief;
        self.revision += 1;
        self.history.push(HistoryEntry { t: self.history.len() + 1, performed: sample, recommended, entropy: entropy_of(&posterior), posterior });
        Ok(self.history.last().expect("just pushed"))
    }

    /// Largest absolute posterior difference against a from-scratch rebuild.
    pub fn audit(&self) -> Result<f64> {
        let fresh = self.belief.rebuild()?;
        Ok(fresh.posterior().iter().zip(self.belief.posterior()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn curve(&self, graph: usize, node: usize, lo: Option<f64>, hi: Option<f64>) -> Result<Curve> {
        let dag = self.belief.universe().get(graph).ok_or(Error::GraphNotInUniverse)?;
        let parent = *dag.parents(node).first().unwrap_or(&node);
        let (olo, ohi) = self.belief.observed_ranges().get(parent).copied().ok_or(Error::DimensionMismatch { expected: self.config.d, got: node })?;
        let default = crate::design::Domain::from_observed(olo, ohi);
        let (lo, hi) = (lo.unwrap_or(default.lo), hi.unwrap_or(default.hi));
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDesign(format!("curve range [{lo}, {hi}] must be finite with lo < hi")));
        }
        self.belief.predict_curve(graph, node, lo, hi, CURVE_POINTS)
    }

    pub fn view(&self) -> SessionView {
        let posterior = self.belief.posterior();
        let graphs = self
            .belief
            .universe()
            .iter()
            .zip(&posterior)
            .enumerate()
            .map(|(index, (g, &p))| GraphEntry { index, graph: g.clone(), p })
            .collect();
        let mut entropy_history = vec![self.initial_entropy];
        entropy_history.extend(self.history.iter().map(|h| h.entropy));
        SessionView {
            id: self.id.clone(),
            revision: self.revision,
            d: self.config.d,
            entropy: entropy_of(&posterior),
            posterior,
            graphs,
            edge_marginals: self.belief.edge_marginals(),
            entropy_history,
            history: self.history.clone(),
            pending: self.pending.clone(),
            converged: self.converged(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub index: usize,
    pub graph: Dag,
    pub p: f64,
}

/// Full read model of a session, as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub revision: u64,
    pub d: usize,
    pub posterior: Vec<f64>,
    pub graphs: Vec<GraphEntry>,
    pub edge_marginals: Vec<Vec<f64>>,
    pub entropy: f64,
    /// Entropy after initialization, then after each observation.
    pub entropy_history: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    pub pending: Option<RecommendationView>,
    pub converged: bool,
}
