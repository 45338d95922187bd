//! Batch front-end: reads a TOML run configuration, runs one stage of the
//! solver suite, and writes a JSON report plus CSV field dumps.

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::pipeline::{Context, Stage};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] critnls::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(critnls::Error::NonConvergence(_) | critnls::Error::NonFinite(_)) => EXIT_NONCONVERGENCE,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "critnls", version, about = "Normalized solutions of the critical NLS and their certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; `verify` defaults to the copy in the output directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `problem.solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Principal eigenpair of −Δ + V.
    Eig,
    /// Shell decomposition V = V₁ + V₂.
    Decompose,
    /// Local minimizer and ground-state gate.
    Minimize,
    /// Mountain-pass solution, level certificate and upper-bound sweep.
    Saddle,
    /// Norm asymptotics of cut-off bubbles.
    Bubbles,
    /// Both ergodic MFG solutions via Hopf-Cole.
    Mfg,
    /// Recompute the report in `--out` from its dumps and compare bytes.
    Verify,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Eig => Stage::Eig,
            Command::Decompose => Stage::Decompose,
            Command::Minimize => Stage::Minimize,
            Command::Saddle => Stage::Saddle,
            Command::Bubbles => Stage::Bubbles,
            Command::Mfg => Stage::Mfg,
            Command::Verify => return None,
        })
    }
}

/// Runs one command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let body = || match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("critnls: {e}");
            e.exit_code()
        }
    };
    match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                eprintln!("critnls: thread pool: {e}");
                EXIT_CONFIG
            }
        },
        None => body(),
    }
}

fn dispatch(cli: &Cli) -> Result<i32, RunError> {
    let Some(stage) = cli.command.stage() else {
        let dir = cli.out.as_ref().ok_or_else(|| RunError::Config("verify needs --out".into()))?;
        let replay = pipeline::verify(dir, cli.config.as_deref())?;
        match replay.first_difference {
            None => println!("verify {}: identical", replay.subcommand),
            Some(line) => println!("verify {}: differs at line {line}", replay.subcommand),
        }
        return Ok(if replay.identical { EXIT_PASS } else { EXIT_CERTIFICATE });
    };
    let path = cli.config.as_ref().ok_or_else(|| RunError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.problem.solver.seed = seed;
    }
    let dir = cli.out.clone().or_else(|| cfg.outputs.directory.clone()).ok_or_else(|| RunError::Config("no output directory: pass --out or set outputs.directory".into()))?;
    let ctx = Context::new(cfg, &dir)?;
    let outcome = pipeline::run(&ctx, stage)?;
    println!("{} {}: {}", stage.name(), if outcome.passes { "pass" } else { "FAIL" }, dir.join(pipeline::REPORT_FILE).display());
    Ok(if outcome.passes { EXIT_PASS } else { EXIT_CERTIFICATE })
}
