//! Ground-truth structural causal models with additive Gaussian noise.

mod expr;

pub use expr::Expr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{InterventionSpec, Sample};
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub node: usize,
    pub expr: Expr,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub node: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Serialized form of [`GroundTruthScm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmConfig {
    pub graph: Dag,
    #[serde(default)]
    pub mechanisms: Vec<MechanismConfig>,
    #[serde(default)]
    pub roots: Vec<RootConfig>,
}

#[derive(Debug, Clone, PartialEq)]
enum NodeSpec {
    Root { mean: f64, sd: f64 },
    Child { expr: Expr, noise_sd: f64 },
}

/// `X_i = f_i(parents) + e_i` for non-roots, `X_i ~ N(mean, sd^2)` for roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScmConfig", into = "ScmConfig")]
pub struct GroundTruthScm {
    graph: Dag,
    nodes: Vec<NodeSpec>,
}

impl TryFrom<ScmConfig> for GroundTruthScm {
    type Error = Error;

    fn try_from(cfg: ScmConfig) -> Result<Self> {
        let d = cfg.graph.d();
        let mut nodes: Vec<Option<NodeSpec>> = vec![None; d];
        let check_sd = |what: &str, node: usize, sd: f64| {
            if sd >= 0.0 && sd.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidScm(format!("node {node}: {what} must be finite and >= 0, got {sd}")))
            }
        };
        for m in cfg.mechanisms {
            if m.node >= d {
                return Err(Error::InvalidScm(format!("mechanism for node {} but d = {d}", m.node)));
            }
            let k = cfg.graph.parents(m.node).len();
            if k == 0 {
                return Err(Error::InvalidScm(format!("node {} has no parents; give it a root distribution", m.node)));
            }
            if m.expr.arity() > k {
                return Err(Error::InvalidScm(format!(
                    "node {}: expression '{}' uses p{} but the node has {k} parent(s)",
                    m.node,
                    m.expr,
                    m.expr.arity() - 1
                )));
            }
            check_sd("noise_sd", m.node, m.noise_sd)?;
            if nodes[m.node].is_some() {
                return Err(Error::InvalidScm(format!("node {} is specified twice", m.node)));
            }
            nodes[m.node] = Some(NodeSpec::Child { expr: m.expr, noise_sd: m.noise_sd });
        }
        for r in cfg.roots {
            if r.node >= d {
                return Err(Error::InvalidScm(format!("root distribution for node {} but d = {d}", r.node)));
            }
            if !cfg.graph.parents(r.node).is_empty() {
                return Err(Error::InvalidScm(format!("node {} has parents; give it a mechanism", r.node)));
            }
            if !r.mean.is_finite() {
                return Err(Error::InvalidScm(format!("node {}: mean must be finite", r.node)));
            }
            check_sd("sd", r.node, r.sd)?;
            if nodes[r.node].is_some() {
                return Err(Error::InvalidScm(format!("node {} is specified twice", r.node)));
            }
            nodes[r.node] = Some(NodeSpec::Root { mean: r.mean, sd: r.sd });
        }
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                n.ok_or_else(|| {
                    let what = if cfg.graph.parents(i).is_empty() { "root distribution" } else { "mechanism" };
                    Error::InvalidScm(format!("missing {what} for node {i}"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { graph: cfg.graph, nodes })
    }
}

impl From<GroundTruthScm> for ScmConfig {
    fn from(s: GroundTruthScm) -> Self {
        let mut mechanisms = vec![];
        let mut roots = vec![];
        for (node, spec) in s.nodes.into_iter().enumerate() {
            match spec {
                NodeSpec::Root { mean, sd } => roots.push(RootConfig { node, mean, sd }),
                NodeSpec::Child { expr, noise_sd } => mechanisms.push(MechanismConfig { node, expr, noise_sd }),
            }
        }
        Self { graph: s.graph, mechanisms, roots }
    }
}

impl GroundTruthScm {
    pub fn from_config(cfg: ScmConfig) -> Result<Self> {
        cfg.try_into()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ScmConfig = serde_json::from_str(s)?;
        cfg.try_into()
    }

    /// `X ~ N(0, 1)`, `Y = 2 tanh(X) + e` with `e ~ N(0, noise_sd^2)`.
    pub fn bivariate_tanh(noise_sd: f64) -> Result<Self> {
        Self::from_config(ScmConfig {
            graph: Dag::from_edges(2, &[(0, 1)])?,
            mechanisms: vec![MechanismConfig { node: 1, expr: Expr::parse("2*tanh(p0)")?, noise_sd }],
            roots: vec![RootConfig { node: 0, mean: 0.0, sd: 1.0 }],
        })
    }

    pub fn graph(&self) -> &Dag {
        &self.graph
    }

    pub fn d(&self) -> usize {
        self.graph.d()
    }

    pub fn to_config(&self) -> ScmConfig {
        self.clone().into()
    }
}

/// Ancestral sample from the SCM, with the intervention target clamped.
pub fn sample_truth(scm: &GroundTruthScm, spec: InterventionSpec, seed: u64) -> Result<Sample> {
    spec.validate(scm.d())?;
    let mut rng = rng::stream(seed, &[]);
    let mut values = vec![0.0; scm.d()];
    for &i in scm.graph.topo_order() {
        if let Some(iv) = spec.get().filter(|iv| iv.target == i) {
            values[i] = iv.value;
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        values[i] = match &scm.nodes[i] {
            NodeSpec::Root { mean, sd } => mean + sd * z,
            NodeSpec::Child { expr, noise_sd } => {
                let p: Vec<f64> = scm.graph.parents(i).iter().map(|&k| values[k]).collect();
                expr.eval(&p) + noise_sd * z
            }
        };
    }
    Sample::new(values, spec)
}
