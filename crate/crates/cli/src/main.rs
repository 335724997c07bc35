use std::path::PathBuf;
use std::process::ExitCode;

use abcd::agent::{run_episode, Strategy};
use abcd::config::{load_config, manifest, write_run};
use abcd::dag::{enumerate_dags, MAX_NODES};
use abcd::Error;
use abcd_service::{AppState, Store};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abcd", version, about = "Active Bayesian causal discovery")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode against the config's ground-truth SCM.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory; replaced if it already holds a run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        /// Overrides max_steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        bo_budget: Option<usize>,
    },
    /// Count (and optionally list) all DAGs on d nodes.
    Enumerate {
        #[arg(long)]
        d: usize,
        /// Print each graph as JSON, one per line.
        #[arg(long)]
        list: bool,
    },
    /// Serve the /v1 session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "abcd-state")]
        state_dir: PathBuf,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse(_)
            | Error::InvalidScm(_)
            | Error::Expression { .. }
            | Error::InvalidEpisode(_)
            | Error::InvalidDesign(_)
            | Error::InvalidPrior(_)
            | Error::InvalidGraph(_)
            | Error::UnknownStrategy { .. }
            | Error::DimensionOutOfRange { .. }
            | Error::Io(_)
    )
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ABCD_LOG", "warn")).init();
    match Cli::parse().cmd {
        Command::Simulate { config, seed, out, strategy, steps, mc_samples, beta, bo_budget } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            if let Some(n) = steps {
                cfg.max_steps = n;
            }
            if let Some(m) = mc_samples {
                cfg.design.mc_samples = m;
            }
            if let Some(b) = beta {
                cfg.design.beta = b;
            }
            if let Some(b) = bo_budget {
                cfg.design.bo_budget = b;
            }
            if let Err(e) = cfg.validate() {
                return fail(EXIT_CONFIG, e);
            }
            let out = out.unwrap_or_else(|| PathBuf::from(format!("runs/seed-{}", cfg.seed)));
            let m = match manifest(&cfg, Some(&config), &out) {
                Ok(m) => m,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match write_run(&out, &m, || run_episode(&cfg)) {
                Ok(ep) => {
                    let last = ep.steps.last();
                    let p_true = last.and_then(|s| s.p_true).or(ep.initial.p_true);
                    println!(
                        "{} steps, p_true = {}, converged = {}, wrote {}",
                        ep.steps.len(),
                        p_true.map_or("n/a".into(), |p| format!("{p:.4}")),
                        ep.converged,
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) if is_config_error(&e) && !matches!(e, Error::Io(_)) => fail(EXIT_CONFIG, e),
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
        Command::Enumerate { d, list } => {
            if d < 1 || d > MAX_NODES {
                return fail(EXIT_CONFIG, format!("--d must be between 1 and {MAX_NODES}, got {d}"));
            }
            let dags = match enumerate_dags(d) {
                Ok(g) => g,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            println!("{}", dags.len());
            if list {
                for g in &dags {
                    println!("{}", serde_json::to_string(g).expect("dag serializes"));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Serve { port, host, state_dir } => {
            let store = match Store::open(&state_dir) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_RUNTIME, format!("state dir {}: {e}", state_dir.display())),
            };
            let rt = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return fail(EXIT_RUNTIME, e),
            };
            rt.block_on(async move {
                let state = match AppState::restore(store) {
                    Ok(s) => s,
                    Err(e) => return fail(EXIT_RUNTIME, format!("restoring sessions: {e}")),
                };
                let listener = match tokio::net::TcpListener::bind((host.as_str(), port)).await {
                    Ok(l) => l,
                    Err(e) => return fail(EXIT_RUNTIME, format!("cannot bind {host}:{port}: {e}")),
                };
                log::info!("listening on {}", listener.local_addr().map_or(format!("{host}:{port}"), |a| a.to_string()));
                match abcd_service::serve(listener, state, shutdown_signal()).await {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(EXIT_RUNTIME, e),
                }
            })
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}
