//! Joint posterior over DAGs and GP mechanisms.
//!
//! The marginal likelihood of a graph factorizes over nodes, so evidence is
//! cached per `(node, parent set)` key and shared by every graph containing
//! that family. A sample drawn under `do(X_j = x)` contributes nothing to the
//! keys of node `j` (truncated factorization) but its clamped value is an
//! ordinary regression input for `j`'s children.

mod root;
mod sample;

pub use root::{NigPosterior, RootModel};
pub use sample::{read_samples_jsonl, write_samples_jsonl, Intervention, InterventionSpec, Sample};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dag::{enumerate_dags, Dag};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, FitBounds, GpDataset, GpHyperparams, GpPosterior, Predictive};
use crate::math::{log_normalize, log_sum_exp, neg_entropy};
use crate::prior::GraphPrior;
use crate::rng;

/// Default minimum number of observational samples.
pub const N_MIN: usize = 5;

/// A node together with a parent set (bitmask over node indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub node: usize,
    pub parents: u32,
}

impl NodeKey {
    pub fn new(node: usize, parents: &[usize]) -> Self {
        Self { node, parents: parents.iter().fold(0, |m, &p| m | (1 << p)) }
    }

    pub fn parent_list(&self) -> Vec<usize> {
        (0..32).filter(|&p| self.parents >> p & 1 == 1).collect()
    }

    pub fn is_root(&self) -> bool {
        self.parents == 0
    }

    /// Whether a sample drawn under `spec` carries a likelihood term for this key.
    pub fn admits(&self, spec: &InterventionSpec) -> bool {
        spec.target() != Some(self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefConfig {
    #[serde(default)]
    pub prior: GraphPrior,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default)]
    pub root_model: RootModel,
    #[serde(default)]
    pub fit_bounds: FitBounds,
    #[serde(default = "default_restarts")]
    pub fit_restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_min() -> usize {
    N_MIN
}

fn default_restarts() -> usize {
    4
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self {
            prior: GraphPrior::uniform(),
            n_min: N_MIN,
            root_model: RootModel::default(),
            fit_bounds: FitBounds::default(),
            fit_restarts: default_restarts(),
            seed: 0,
        }
    }
}

/// Cached conditional model for one key.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeModel {
    Root(NigPosterior),
    Gp(GpPosterior),
}

impl NodeModel {
    pub fn log_evidence(&self) -> f64 {
        match self {
            NodeModel::Root(p) => p.log_evidence,
            NodeModel::Gp(g) => g.log_evidence(),
        }
    }

    /// Evidence increment from one more observation of this family.
    fn log_predictive_density(&self, inputs: &[f64], y: f64) -> Result<f64> {
        match self {
            NodeModel::Root(p) => Ok(p.log_predictive_density(y)),
            NodeModel::Gp(g) => g.log_predictive_density(inputs, y),
        }
    }

    fn appended(&self, inputs: &[f64], y: f64) -> Result<Self> {
        Ok(match self {
            NodeModel::Root(p) => NodeModel::Root(p.appended(y)),
            NodeModel::Gp(g) => NodeModel::Gp(g.appended(inputs, y)?),
        })
    }
}

/// How each key's hyperparameters were obtained at initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitOutcome {
    /// Root family: conjugate model, nothing to fit.
    Conjugate,
    Fitted(GpHyperparams),
    /// Fitting failed; the message says why and defaults were used.
    Defaulted(String),
}

/// The agent's world model. Immutable: [`BeliefState::update`] returns a new
/// snapshot and leaves `self` untouched.
#[derive(Debug, Clone)]
pub struct BeliefState {
    d: usize,
    universe: Arc<[Dag]>,
    log_prior: Arc<[f64]>,
    log_posterior: Vec<f64>,
    data: Vec<Sample>,
    keys: Arc<[NodeKey]>,
    /// `graph_keys[g][i]` indexes `keys` for node `i` of graph `g`.
    graph_keys: Arc<[Vec<usize>]>,
    models: Vec<Arc<NodeModel>>,
    hyperparams: Arc<BTreeMap<NodeKey, GpHyperparams>>,
    root_model: RootModel,
    centering: Arc<[f64]>,
    observed_ranges: Arc<[(f64, f64)]>,
}

impl BeliefState {
    /// Fit hyperparameters once on observational data and build every cache.
    pub fn initialize(obs: &[Sample], cfg: &BeliefConfig) -> Result<(Self, BTreeMap<NodeKey, FitOutcome>)> {
        let n_min = cfg.n_min.max(1);
        if obs.len() < n_min {
            return Err(Error::TooFewSamples { n_min, got: obs.len() });
        }
        let d = obs[0].d();
        for (index, s) in obs.iter().enumerate() {
            s.validate(d)?;
            if !s.intervention.is_observational() {
                return Err(Error::NotObservational { index });
            }
        }
        cfg.root_model.validate()?;
        let universe = enumerate_dags(d)?;
        let n = obs.len() as f64;
        let centering: Vec<f64> = (0..d).map(|i| obs.iter().map(|s| s.values[i]).sum::<f64>() / n).collect();
        let observed_ranges: Vec<(f64, f64)> = (0..d)
            .map(|i| {
                obs.iter()
                    .map(|s| s.values[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .collect();

        let keys = collect_keys(&universe);
        let mut hyperparams = BTreeMap::new();
        let mut report = BTreeMap::new();
        for key in &keys {
            if key.is_root() {
                report.insert(*key, FitOutcome::Conjugate);
                continue;
            }
            let data = key_dataset(key, obs, &centering)?;
            let seed = rng::derive_seed(cfg.seed, &[rng::TAG_FIT, key.node as u64, key.parents as u64]);
            let outcome = match fit_hyperparams(&data, &cfg.fit_bounds, cfg.fit_restarts, seed) {
                Ok(h) => {
                    hyperparams.insert(*key, h.clone());
                    FitOutcome::Fitted(h)
                }
                Err(e) => {
                    log::warn!("hyperparameter fit for {key:?} failed ({e}); using defaults");
                    hyperparams.insert(*key, GpHyperparams::defaults(data.dim()));
                    FitOutcome::Defaulted(e.to_string())
                }
            };
            report.insert(*key, outcome);
        }
        let log_prior = cfg.prior.log_prior_vector(&universe)?;
        let belief = Self::from_parts(
            universe,
            log_prior,
            centering,
            observed_ranges,
            hyperparams,
            cfg.root_model,
            obs.to_vec(),
        )?;
        Ok((belief, report))
    }

    /// Build a belief from scratch with given hyperparameters and centering.
    pub fn from_parts(
        universe: Vec<Dag>,
        log_prior: Vec<f64>,
        centering: Vec<f64>,
        observed_ranges: Vec<(f64, f64)>,
        hyperparams: BTreeMap<NodeKey, GpHyperparams>,
        root_model: RootModel,
        data: Vec<Sample>,
    ) -> Result<Self> {
        let d = centering.len();
        if universe.is_empty() || universe.iter().any(|g| g.d() != d) {
            return Err(Error::InvalidGraph("universe must be nonempty with matching node count".into()));
        }
        if log_prior.len() != universe.len() {
            return Err(Error::DimensionMismatch { expected: universe.len(), got: log_prior.len() });
        }
        for s in &data {
            s.validate(d)?;
        }
        let keys = collect_keys(&universe);
        let graph_keys = graph_key_index(&universe, &keys);
        let models = keys
            .iter()
            .map(|key| build_model(key, &data, &centering, &hyperparams, &root_model).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let mut belief = Self {
            d,
            universe: universe.into(),
            log_prior: log_prior.into(),
            log_posterior: Vec::new(),
            data,
            keys: keys.into(),
            graph_keys: graph_keys.into(),
            models,
            hyperparams: Arc::new(hyperparams),
            root_model,
            centering: centering.into(),
            observed_ranges: observed_ranges.into(),
        };
        belief.log_posterior = belief.compute_log_posterior()?;
        Ok(belief)
    }

    /// Recompute every cache from the full data list (same hyperparameters).
    pub fn rebuild(&self) -> Result<Self> {
        Self::from_parts(
            self.universe.to_vec(),
            self.log_prior.to_vec(),
            self.centering.to_vec(),
            self.observed_ranges.to_vec(),
            (*self.hyperparams).clone(),
            self.root_model,
            self.data.clone(),
        )
    }

    /// Same model and data, different graph prior.
    pub fn with_prior(&self, prior: &GraphPrior) -> Result<Self> {
        let mut b = self.clone();
        b.log_prior = prior.log_prior_vector(&self.universe)?.into();
        b.log_posterior = b.compute_log_posterior()?;
        Ok(b)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn universe(&self) -> &[Dag] {
        &self.universe
    }

    pub fn data(&self) -> &[Sample] {
        &self.data
    }

    pub fn keys(&self) -> &[NodeKey] {
        &self.keys
    }

    pub fn hyperparams(&self) -> &BTreeMap<NodeKey, GpHyperparams> {
        &self.hyperparams
    }

    pub fn root_model(&self) -> RootModel {
        self.root_model
    }

    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    /// Per-node `[min, max]` of the initial observational data.
    pub fn observed_ranges(&self) -> &[(f64, f64)] {
        &self.observed_ranges
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// Normalized log-posterior over [`Self::universe`].
    pub fn log_posterior(&self) -> &[f64] {
        &self.log_posterior
    }

    pub fn posterior(&self) -> Vec<f64> {
        self.log_posterior.iter().map(|l| l.exp()).collect()
    }

    /// Shannon entropy of the graph posterior, in nats.
    pub fn entropy(&self) -> f64 {
        -neg_entropy(&self.log_posterior)
    }

    pub fn graph_index(&self, g: &Dag) -> Option<usize> {
        self.universe.iter().position(|u| u == g)
    }

    pub fn key_index(&self, key: &NodeKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }
    pub fn model(&self, key: &NodeKey) -> Option<&NodeModel> {
        self.key_index(key).map(|k| &*self.models[k])
    }

    /// Pointer identity of a cached model; used to check cache sharing.
    pub fn model_arc(&self, key: &NodeKey) -> Option<&Arc<NodeModel>> {
        self.key_index(key).map(|k| &self.models[k])
    }

    /// Cached log evidence of node `i` given `parents` over all admitted data.
    pub fn node_log_evidence(&self, i: usize, parents: &[usize]) -> Result<f64> {
        let key = NodeKey::new(i, parents);
        match self.key_index(&key) {
            Some(k) => Ok(self.models[k].log_evidence()),
            None => node_log_evidence(i, parents, &self.data, self),
        }
    }

    /// Sum of cached per-node evidences for graph `g`.
    pub fn graph_log_evidence(&self, g: usize) -> f64 {
        self.graph_keys[g].iter().map(|&k| self.models[k].log_evidence()).sum()
    }

    fn compute_log_posterior(&self) -> Result<Vec<f64>> {
        let mut lp: Vec<f64> = (0..self.universe.len())
            .map(|g| {
                let prior = self.log_prior[g];
                if prior.is_finite() {
                    prior + self.graph_log_evidence(g)
                } else {
                    prior
                }
            })
            .collect();
        if !log_normalize(&mut lp).is_finite() {
            return Err(Error::EmptyHypothesisSpace);
        }
        Ok(lp)
    }

    /// Append one sample, extending each admitting cache incrementally.
    pub fn update(&self, s: Sample) -> Result<Self> {
        s.validate(self.d)?;
        let centered = self.center(&s.values);
        let models = self
            .keys
            .iter()
            .zip(&self.models)
            .map(|(key, m)| {
                if key.admits(&s.intervention) {
                    let (x, y) = family_values(key, &centered);
                    m.appended(&x, y).map(Arc::new)
                } else {
                    Ok(Arc::clone(m))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = self.clone();
        next.models = models;
        next.data.push(s);
        next.log_posterior = next.compute_log_posterior()?;
        Ok(next)
    }

    pub fn update_all(&self, samples: impl IntoIterator<Item = Sample>) -> Result<Self> {
        samples.into_iter().try_fold(self.clone(), |b, s| b.update(s))
    }

    pub(crate) fn center(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(self.centering.iter()).map(|(v, c)| v - c).collect()
    }

    /// Evidence increment for every key if the centered vector were appended
    /// under an intervention on `target`. Masked keys get 0.
    pub(crate) fn evidence_deltas(&self, centered: &[f64], target: Option<usize>) -> Result<Vec<f64>> {
        self.keys
            .iter()
            .zip(&self.models)
            .map(|(key, m)| {
                if Some(key.node) == target {
                    return Ok(0.0);
                }
                let (x, y) = family_values(key, centered);
                m.log_predictive_density(&x, y)
            })
            .collect()
    }

    /// Log-posterior of graph `g` after a hypothetical observation with the
    /// given per-key evidence increments.
    pub(crate) fn hypothetical_log_posterior(&self, g: usize, deltas: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(self.log_posterior.iter().zip(self.graph_keys.iter()).map(|(&lp, keys)| {
            if lp.is_finite() {
                lp + keys.iter().map(|&k| deltas[k]).sum::<f64>()
            } else {
                lp
            }
        }));
        scratch[g] - log_sum_exp(scratch)
    }

    /// Draw a centered outcome vector from graph `g` under the intervention.
    pub(crate) fn sample_centered<R: Rng + ?Sized>(
        &self,
        g: usize,
        intervention: Option<Intervention>,
        rng: &mut R,
    ) -> Vec<f64> {
        let dag = &self.universe[g];
        let mut out = vec![0.0; self.d];
        for &node in dag.topo_order() {
            if let Some(iv) = intervention.filter(|iv| iv.target == node) {
                out[node] = iv.value - self.centering[node];
                continue;
            }
            let key = &self.keys[self.graph_keys[g][node]];
            let model = &self.models[self.graph_keys[g][node]];
            out[node] = match &**model {
                NodeModel::Root(p) => p.sample(rng),
                NodeModel::Gp(gp) => {
                    let (x, _) = family_values(key, &out);
                    let Predictive { mean, variance_f } = gp.predict(&x);
                    let sd = (variance_f + gp.hyper().noise_variance).sqrt();
                    let z: f64 = rng.sample(StandardNormal);
                    mean + sd * z
                }
            };
        }
        out
    }

    /// Ancestral sample from graph `g`'s interventional distribution.
    /// The target coordinate equals the intervention value exactly.
    pub fn sample_interventional(&self, g: &Dag, spec: InterventionSpec, seed: u64) -> Result<Sample> {
        let gi = self.graph_index(g).ok_or(Error::GraphNotInUniverse)?;
        spec.validate(self.d)?;
        let mut r = rng::stream(seed, &[]);
        let centered = self.sample_centered(gi, spec.get(), &mut r);
        let mut values: Vec<f64> = centered.iter().zip(self.centering.iter()).map(|(v, c)| v + c).collect();
        if let Some(iv) = spec.get() {
            values[iv.target] = iv.value;
        }
        Sample::new(values, spec)
    }

    /// `P(p -> i)` summed over the graph posterior.
    pub fn edge_marginals(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.d]; self.d];
        for (g, lp) in self.universe.iter().zip(&self.log_posterior) {
            let p = lp.exp();
            for (a, b) in g.edges() {
                m[a][b] += p;
            }
        }
        m
    }

    /// Predictive curve of a single-parent node over `[lo, hi]`, in raw units.
    pub fn predict_curve(&self, g: usize, node: usize, lo: f64, hi: f64, points: usize) -> Result<Curve> {
        let dag = self.universe.get(g).ok_or(Error::GraphNotInUniverse)?;
        if node >= self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: node });
        }
        let parents = dag.parents(node);
        if parents.len() != 1 {
            return Err(Error::InvalidGraph(format!(
                "node {node} has {} parents in graph {g}; curves need exactly one",
                parents.len()
            )));
        }
        let parent = parents[0];
        let NodeModel::Gp(gp) = &*self.models[self.graph_keys[g][node]] else {
            unreachable!("non-root family is always a GP")
        };
        let mut curve = gp_curve(gp, lo - self.centering[parent], hi - self.centering[parent], points);
        for x in &mut curve.grid {
            *x += self.centering[parent];
        }
        let c = self.centering[node];
        for v in curve.mean.iter_mut().chain(&mut curve.lower).chain(&mut curve.upper) {
            *v += c;
        }
        Ok(curve)
    }
}

/// Predictive mean with a ±2 sd observation band over a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Curve of a one-input GP on `points` uniformly spaced inputs in `[lo, hi]`.
pub fn gp_curve(gp: &GpPosterior, lo: f64, hi: f64, points: usize) -> Curve {
    let points = points.max(2);
    let grid: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let noise = gp.hyper().noise_variance;
    let mut curve = Curve { grid: grid.clone(), mean: vec![], lower: vec![], upper: vec![] };
    for x in grid {
        let p = gp.predict(&[x]);
        let sd = (p.variance_f + noise).sqrt();
        curve.mean.push(p.mean);
        curve.lower.push(p.mean - 2.0 * sd);
        curve.upper.push(p.mean + 2.0 * sd);
    }
    curve
}

fn collect_keys(universe: &[Dag]) -> Vec<NodeKey> {
    let mut keys: Vec<NodeKey> = universe
        .iter()
        .flat_map(|g| (0..g.d()).map(move |i| NodeKey { node: i, parents: g.parent_mask(i) }))
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn graph_key_index(universe: &[Dag], keys: &[NodeKey]) -> Vec<Vec<usize>> {
    universe
        .iter()
        .map(|g| {
            (0..g.d())
                .map(|i| keys.binary_search(&NodeKey { node: i, parents: g.parent_mask(i) }).expect("key collected"))
                .collect()
        })
        .collect()
}

/// `(parent inputs, node value)` for a key, from a centered vector.
#[inline]
fn family_values(key: &NodeKey, centered: &[f64]) -> (Vec<f64>, f64) {
    let x = (0..centered.len()).filter(|&p| key.parents >> p & 1 == 1).map(|p| centered[p]).collect();
    (x, centered[key.node])
}

/// Regression dataset for a key: admitted samples only, centered values.
fn key_dataset(key: &NodeKey, data: &[Sample], centering: &[f64]) -> Result<GpDataset> {
    let parents = key.parent_list();
    let mut ds = GpDataset::empty(parents.len());
    for s in data.iter().filter(|s| key.admits(&s.intervention)) {
        let x: Vec<f64> = parents.iter().map(|&p| s.values[p] - centering[p]).collect();
        ds.push(&x, s.values[key.node] - centering[key.node])?;
    }
    Ok(ds)
}

fn build_model(
    key: &NodeKey,
    data: &[Sample],
    centering: &[f64],
    hyperparams: &BTreeMap<NodeKey, GpHyperparams>,
    root_model: &RootModel,
) -> Result<NodeModel> {
    let ds = key_dataset(key, data, centering)?;
    if key.is_root() {
        let ys = ds.targets();
        let mut post = root_model.posterior(ys);
        // batch closed form, so that rebuilt caches are an independent route
        post.log_evidence = root_model.log_evidence(ys);
        return Ok(NodeModel::Root(post));
    }
    let h = hyperparams
        .get(key)
        .ok_or_else(|| Error::MissingHyperparams { node: key.node, parents: key.parent_list() })?;
    Ok(NodeModel::Gp(GpPosterior::new(ds, h.clone())?))
}

/// Log evidence of node `i` regressed on `parents`, from scratch over `data`,
/// using the belief's hyperparameters, root model and centering.
pub fn node_log_evidence(i: usize, parents: &[usize], data: &[Sample], belief: &BeliefState) -> Result<f64> {
    let key = NodeKey::new(i, parents);
    Ok(build_model(&key, data, &belief.centering, &belief.hyperparams, &belief.root_model)?.log_evidence())
}
