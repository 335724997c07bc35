use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, InterventionSpec};
use crate::design::{grid_search_intervention, optimize_intervention_until, DesignConfig, EvalRecord, GRID_POINTS};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_STRATEGY};

/// How the next intervention is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// GP-UCB over the MC information gain, per target.
    #[default]
    Bo,
    /// Uniform target, uniform value over its domain.
    Random,
    /// Targets in turn, uniform value over the domain.
    RoundRobin,
    /// Information gain on a dense grid per target.
    GridEig,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Bo, Strategy::Random, Strategy::RoundRobin, Strategy::GridEig];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bo => "bo",
            Strategy::Random => "random",
            Strategy::RoundRobin => "round_robin",
            Strategy::GridEig => "grid_eig",
        }
    }

    /// Choose the intervention for step `t` (1-based). `seed` drives the
    /// random strategies and the MC draws.
    pub fn choose(
        self,
        belief: &BeliefState,
        design: &DesignConfig,
        t: usize,
        seed: u64,
        deadline: Option<Instant>,
    ) -> Result<Choice> {
        let d = belief.d();
        let uniform = |target: usize| -> Result<Choice> {
            let dom = design.domain(target, belief)?;
            let mut r = stream(seed, &[TAG_STRATEGY, t as u64]);
            let value = if dom.width() > 0.0 { r.random_range(dom.lo..=dom.hi) } else { dom.lo };
            Ok(Choice { spec: InterventionSpec::intervene(target, value), eig: None, diagnostics: vec![], budget_exhausted: false })
        };
        match self {
            Strategy::Random => {
                let target = stream(seed, &[TAG_STRATEGY, t as u64, 1]).random_range(0..d);
                uniform(target)
            }
            Strategy::RoundRobin => uniform((t - 1) % d),
            Strategy::Bo | Strategy::GridEig => {
                let cfg = design.with_seed(seed);
                let r = if self == Strategy::Bo {
                    optimize_intervention_until(belief, &cfg, deadline)?
                } else {
                    grid_search_intervention(belief, &cfg, GRID_POINTS)?
                };
                Ok(Choice {
                    spec: r.intervention(),
                    eig: Some(r.eig),
                    diagnostics: r.diagnostics,
                    budget_exhausted: r.budget_exhausted,
                })
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownStrategy {
            name: s.to_string(),
            options: Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", "),
        })
    }
}

/// A chosen intervention. `eig` is absent for strategies that do not score.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub spec: InterventionSpec,
    pub eig: Option<f64>,
    pub diagnostics: Vec<EvalRecord>,
    pub budget_exhausted: bool,
}
