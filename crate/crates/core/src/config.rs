//! Versioned JSON configs, run manifests and run-directory output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agent::{write_summary_csv, write_trace_jsonl, Episode, EpisodeConfig, ModelOptions, Strategy};
use crate::design::{DesignConfig, EvalRecord};
use crate::error::{Error, Result};
use crate::prior::GraphPrior;
use crate::scm::GroundTruthScm;

pub const EPISODE_SCHEMA: &str = "abcd.episode/1";
pub const MANIFEST_SCHEMA: &str = "abcd.manifest/1";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const INITIAL_FILE: &str = "initial.json";

/// On-disk episode config. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: String,
    pub scm: GroundTruthScm,
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
    #[serde(default = "one")]
    pub samples_per_step: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_confidence() -> f64 {
    crate::agent::DEFAULT_CONFIDENCE_STOP
}

fn one() -> usize {
    1
}

impl From<ConfigFile> for EpisodeConfig {
    fn from(c: ConfigFile) -> Self {
        Self {
            scm: Some(c.scm),
            n_obs: c.n_obs,
            max_steps: c.max_steps,
            confidence_stop: c.confidence_stop,
            design: c.design,
            prior: c.prior,
            strategy: c.strategy,
            model: c.model,
            samples_per_step: c.samples_per_step,
            seed: c.seed,
        }
    }
}

impl TryFrom<EpisodeConfig> for ConfigFile {
    type Error = Error;

    fn try_from(c: EpisodeConfig) -> Result<Self> {
        Ok(Self {
            schema: EPISODE_SCHEMA.into(),
            scm: c.scm.ok_or_else(|| Error::InvalidEpisode("a config file needs an scm".into()))?,
            n_obs: c.n_obs,
            max_steps: c.max_steps,
            confidence_stop: c.confidence_stop,
            design: c.design,
            prior: c.prior,
            strategy: c.strategy,
            model: c.model,
            samples_per_step: c.samples_per_step,
            seed: c.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub config_path: Option<PathBuf>,
    pub config: ConfigFile,
    pub out_dir: PathBuf,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema: Option<String>,
}

/// Parse an episode config or a run manifest (whose resolved config is
/// returned). Errors carry serde's line and column.
pub fn parse_config(text: &str) -> Result<EpisodeConfig> {
    let probe: SchemaProbe = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let cfg: EpisodeConfig = match probe.schema.as_deref() {
        Some(EPISODE_SCHEMA) => serde_json::from_str::<ConfigFile>(text).map_err(|e| Error::Parse(e.to_string()))?.into(),
        Some(MANIFEST_SCHEMA) => {
            serde_json::from_str::<RunManifest>(text).map_err(|e| Error::Parse(e.to_string()))?.config.into()
        }
        Some(other) => {
            return Err(Error::Parse(format!("unsupported schema '{other}', expected '{EPISODE_SCHEMA}'")));
        }
        None => return Err(Error::Parse(format!("missing field `schema` (expected '{EPISODE_SCHEMA}')"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<EpisodeConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn manifest(cfg: &EpisodeConfig, config_path: Option<&Path>, out_dir: &Path) -> Result<RunManifest> {
    Ok(RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        config_path: config_path.map(Path::to_path_buf),
        config: cfg.clone().try_into()?,
        out_dir: out_dir.to_path_buf(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    })
}

#[derive(Serialize)]
struct StepDiagnostics<'a> {
    t: usize,
    evaluations: &'a [EvalRecord],
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Creates `out` atomically: everything is written into a sibling staging
/// directory (manifest first, before `run` is called) which is renamed into
/// place once all files exist. An existing run directory at `out` is replaced.
pub fn write_run(
    out: &Path,
    manifest: &RunManifest,
    run: impl FnOnce() -> Result<Episode>,
) -> Result<Episode> {
    if out.exists() && !is_replaceable(out)? {
        return Err(Error::Io(format!("{} exists and is not a run directory", out.display())));
    }
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = out.file_name().ok_or_else(|| Error::Io(format!("bad output path {}", out.display())))?;
    let staging = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let result = (|| {
        write_file(&staging.join(MANIFEST_FILE), |w| Ok(serde_json::to_writer_pretty(w, manifest)?))?;
        let ep = run()?;
        write_file(&staging.join(TRACE_FILE), |w| write_trace_jsonl(w, &ep.steps))?;
        write_file(&staging.join(SUMMARY_FILE), |w| write_summary_csv(w, &ep))?;
        let diag: Vec<StepDiagnostics> =
            ep.steps.iter().zip(&ep.diagnostics).map(|(s, d)| StepDiagnostics { t: s.t, evaluations: d }).collect();
        write_file(&staging.join(DIAGNOSTICS_FILE), |w| Ok(serde_json::to_writer(w, &diag)?))?;
        write_file(&staging.join(INITIAL_FILE), |w| Ok(serde_json::to_writer(w, &ep.initial)?))?;
        Ok(ep)
    })();
    let ep = match result {
        Ok(ep) => ep,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if out.exists() {
        let old = parent.join(format!(".{}.old-{}", name.to_string_lossy(), std::process::id()));
        fs::rename(out, &old)?;
        fs::rename(&staging, out)?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&staging, out)?;
    }
    Ok(ep)
}

fn is_replaceable(dir: &Path) -> Result<bool> {
    Ok(dir.is_dir() && (dir.join(MANIFEST_FILE).is_file() || fs::read_dir(dir)?.next().is_none()))
}
