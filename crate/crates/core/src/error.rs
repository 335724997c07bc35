use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node count {d} out of range: exhaustive enumeration supports 1 <= d <= {max}")]
    DimensionOutOfRange { d: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph is not in the hypothesis universe")]
    GraphNotInUniverse,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("every graph has zero prior probability; the hypothesis space is empty")]
    EmptyHypothesisSpace,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("kernel matrix is not positive definite after jitter ladder {ladder:?}")]
    NotPositiveDefinite { ladder: Vec<f64> },

    #[error("need at least {needed} points to fit hyperparameters, got {got}; use the defaults instead")]
    TooFewPointsToFit { needed: usize, got: usize },

    #[error("need at least n_min = {n_min} observational samples, got {got}")]
    TooFewSamples { n_min: usize, got: usize },

    #[error("initial samples must be observational; sample {index} is interventional")]
    NotObservational { index: usize },

    #[error("no hyperparameters for node {node} with parents {parents:?}; initialize the belief first")]
    MissingHyperparams { node: usize, parents: Vec<usize> },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("clamping mismatch: values[{target}] = {observed} but the intervention set it to {value}")]
    ClampMismatch { target: usize, value: f64, observed: f64 },

    #[error("log-posterior is not normalized (log-sum-exp = {0})")]
    Unnormalized(f64),

    #[error("intervention value {x} outside domain [{lo}, {hi}] of node {target}")]
    OutsideDomain { target: usize, x: f64, lo: f64, hi: f64 },

    #[error("invalid design config: {0}")]
    InvalidDesign(String),

    #[error("every intervention target failed to evaluate: {0}")]
    AllTargetsFailed(String),

    #[error("unknown strategy {name:?}; expected one of {options}")]
    UnknownStrategy { name: String, options: String },

    #[error("invalid model config: {0}")]
    InvalidScm(String),

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },

    #[error("invalid episode config: {0}")]
    InvalidEpisode(String),

    #[error("initialization failed (step {step}): {source}")]
    Initialization { step: i64, source: Box<Error> },

    #[error("{0}")]
    Io(String),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
