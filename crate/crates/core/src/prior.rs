//! Prior distributions over the enumerated DAG universe.

use serde::{Deserialize, Serialize};

use crate::dag::{shd, Dag};
use crate::error::{Error, Result};
use crate::math::{log_normalize, LOG_ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitEntry {
    pub graph: Dag,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    /// Weight `1 / (1 + edges)`.
    Sparsity,
    /// Weight `1 / (1 + shd(g, reference))`.
    Reference {
        #[serde(default)]
        reference_graph: Option<Dag>,
    },
    /// Unnormalized table; every graph of the universe must be listed.
    Explicit { table: Vec<ExplicitEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPrior {
    #[serde(flatten)]
    pub kind: PriorKind,
    /// Graphs with more edges than this get prior zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edges: Option<usize>,
}

impl Default for GraphPrior {
    fn default() -> Self {
        Self::uniform()
    }
}

impl GraphPrior {
    pub fn uniform() -> Self {
        Self { kind: PriorKind::Uniform, max_edges: None }
    }

    pub fn sparsity() -> Self {
        Self { kind: PriorKind::Sparsity, max_edges: None }
    }

    pub fn reference(g: Dag) -> Self {
        Self { kind: PriorKind::Reference { reference_graph: Some(g) }, max_edges: None }
    }

    pub fn explicit(table: Vec<(Dag, f64)>) -> Self {
        let table = table.into_iter().map(|(graph, p)| ExplicitEntry { graph, p }).collect();
        Self { kind: PriorKind::Explicit { table }, max_edges: None }
    }

    pub fn with_max_edges(mut self, max_edges: usize) -> Self {
        self.max_edges = Some(max_edges);
        self
    }

    fn log_weight(&self, g: &Dag) -> Result<f64> {
        if self.max_edges.is_some_and(|m| g.edge_count() > m) {
            return Ok(LOG_ZERO);
        }
        let w = match &self.kind {
            PriorKind::Uniform => 0.0,
            PriorKind::Sparsity => -(1.0 + g.edge_count() as f64).ln(),
            PriorKind::Reference { reference_graph } => {
                let r = reference_graph
                    .as_ref()
                    .ok_or_else(|| Error::InvalidPrior("reference prior without reference_graph".into()))?;
                -(1.0 + shd(g, r)? as f64).ln()
            }
            PriorKind::Explicit { table } => {
                let entry = table
                    .iter()
                    .find(|e| &e.graph == g)
                    .ok_or_else(|| Error::InvalidPrior(format!("explicit table has no entry for {g:?}")))?;
                if !(entry.p >= 0.0 && entry.p.is_finite()) {
                    return Err(Error::InvalidPrior(format!("bad probability {} for {g:?}", entry.p)));
                }
                entry.p.ln()
            }
        };
        Ok(w)
    }

    /// Normalized log-prior for every graph of `universe`, in order.
    pub fn log_prior_vector(&self, universe: &[Dag]) -> Result<Vec<f64>> {
        if universe.is_empty() {
            return Err(Error::InvalidPrior("empty universe".into()));
        }
        let mut v = universe.iter().map(|g| self.log_weight(g)).collect::<Result<Vec<_>>>()?;
        let z = log_normalize(&mut v);
        if !z.is_finite() {
            return Err(Error::EmptyHypothesisSpace);
        }
        Ok(v)
    }
}

/// Normalized log-prior of `g` within `universe`; `LOG_ZERO` for excluded graphs.
pub fn log_prior(g: &Dag, prior: &GraphPrior, universe: &[Dag]) -> Result<f64> {
    let idx = universe.iter().position(|u| u == g).ok_or(Error::GraphNotInUniverse)?;
    Ok(prior.log_prior_vector(universe)?[idx])
}
