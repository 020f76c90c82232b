//! `qeilab <subcommand> --config <path> [--out <dir>] [--jobs <n>]`.
//!
//! Exit codes: 0 when every asserted invariant holds, 1 on an assertion failure
//! (the failing rows go to stderr), 2 on a configuration error.

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{field_error, ConfigError};
use crate::report::{Outcome, Provenance};

pub const VERSION: &str = concat!("qeilab-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "qeilab", version, about = "Modular-theory energy bound checks and reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output root; reports go to `<out>/<subcommand>/`.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; overrides the `jobs` config key.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Modular objects of seeded finite-dimensional pairs.
    ModularCheck(RunArgs),
    /// Toy-model assumptions, the local bound and the modular rewriting chain.
    ToyCheck(RunArgs),
    /// Lattice modular spectra and the coherent energy scaling.
    LatticeRun(RunArgs),
    /// Lattice modular bound sweeps and the refinement scan.
    QeiSweep(RunArgs),
    /// Worst-case energy search over state families.
    OptSearch(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ModularCheck(_) => "modular-check",
            Command::ToyCheck(_) => "toy-check",
            Command::LatticeRun(_) => "lattice-run",
            Command::QeiSweep(_) => "qei-sweep",
            Command::OptSearch(_) => "opt-search",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::ModularCheck(a)
            | Command::ToyCheck(a)
            | Command::LatticeRun(a)
            | Command::QeiSweep(a)
            | Command::OptSearch(a) => a,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write reports: {0}")]
    Io(#[from] std::io::Error),
}

/// A subcommand's configuration and its run.
pub trait RunConfig: DeserializeOwned + Sync {
    fn seed_mut(&mut self) -> &mut u64;
    fn jobs(&self) -> Option<usize>;
    fn validate(&self) -> Result<(), ConfigError>;
    fn execute(&self) -> Result<Outcome, RunError>;
}

/// Independent generator for item `index` of the stream family `tag`.
pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index);
    rng
}

pub fn run(cli: Cli) -> i32 {
    let name = cli.command.name();
    let args = cli.command.args().clone();
    let result = match cli.command {
        Command::ModularCheck(_) => drive::<commands::modular::ModularConfig>(name, &args),
        Command::ToyCheck(_) => drive::<commands::toy::ToyConfig>(name, &args),
        Command::LatticeRun(_) => drive::<commands::lattice::LatticeConfig>(name, &args),
        Command::QeiSweep(_) => drive::<commands::qei::QeiConfig>(name, &args),
        Command::OptSearch(_) => drive::<commands::search::SearchConfig>(name, &args),
    };
    match result {
        Ok(code) => code,
        Err(RunError::Config(e)) => {
            eprintln!("qeilab {name}: config error: {e}");
            2
        }
        Err(e) => {
            eprintln!("qeilab {name}: {e}");
            1
        }
    }
}

fn prepare_dir(out: &Path, name: &str) -> Result<PathBuf, ConfigError> {
    let dir = out.join(name);
    std::fs::create_dir_all(&dir).map_err(|e| field_error("--out", format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".write-check");
    std::fs::write(&probe, b"").map_err(|e| field_error("--out", format!("{} is not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(probe);
    Ok(dir)
}

fn drive<C: RunConfig>(name: &str, args: &RunArgs) -> Result<i32, RunError> {
    let path = args.config.display().to_string();
    let bytes = std::fs::read(&args.config).map_err(|e| ConfigError::Read {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError::Parse {
        path: path.clone(),
        message: "not valid UTF-8".into(),
    })?;
    let mut cfg: C = config::parse(&path, &text)?;
    if let Some(seed) = config::seed_override()? {
        *cfg.seed_mut() = seed;
    }
    cfg.validate()?;
    let jobs = args.jobs.or(cfg.jobs());
    if jobs == Some(0) {
        return Err(field_error("jobs", "must be at least 1").into());
    }
    let dir = prepare_dir(&args.out, name)?;
    let prov = Provenance {
        seed: *cfg.seed_mut(),
        config_hash: hex::encode(Sha256::digest(&bytes)),
        version: VERSION,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Numerical(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| cfg.execute())?;
    report::write_outcome(&dir, name, &outcome, &prov)?;
    if outcome.failures.is_empty() {
        println!(
            "{name}: all checks passed ({} reports, {} findings) -> {}",
            outcome.reports.len(),
            outcome.findings.len(),
            dir.display()
        );
        for f in &outcome.findings {
            println!("finding: {f}");
        }
        return Ok(0);
    }
    for f in &outcome.failures {
        eprintln!("assertion failed in {}.csv row {}: {}", f.report, f.row, f.reason);
        if let Some(r) = outcome.report(f.report) {
            eprint!("{}", report::render_row(r, f.row, &prov));
        }
    }
    Ok(1)
}
