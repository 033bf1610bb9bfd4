//! Batch front-end: parse a run configuration, execute a command with full
//! reproducibility, and emit CSV/JSON artifacts.
//!
//! Output files are byte-identical across reruns with the same config and
//! seed (and across `--workers` settings: work units are addressed by rng
//! stream id and reassembled in order). Timing goes to stderr, never into
//! the artifacts.

pub mod commands;
pub mod config;

pub use config::RunConfig;

use crate::error::{Error, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "lgas",
    about = "Collision, chain, diffusion and stationary-law runs for the soft dynamical scatterer gas",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "run.toml")]
    pub config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for independent chains/paths/collisions.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Batch of single collisions (optionally with expansion residuals).
    Collide,
    /// Energy or vector Markov chains.
    Chain,
    /// Reflected Euler-Maruyama paths of the limit diffusion.
    Sde,
    /// Stationary density tables and the coefficient block.
    Stationary,
    /// Truncated chain vs diffusion: moments and stationary KS report.
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Collide => "collide",
            Command::Chain => "chain",
            Command::Sde => "sde",
            Command::Stationary => "stationary",
            Command::Compare => "compare",
        }
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 on
/// configuration errors, 3 on runtime/solver failures.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lgas {}: error: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParam(_) | Error::BadEdges(_) => 2,
        _ => 3,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let started = std::time::Instant::now();
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)?;
    let workers = cli.workers.max(1);
    match cli.command {
        Command::Collide => commands::collide(&cfg, &cli.out, workers)?,
        Command::Chain => commands::chain(&cfg, &cli.out, workers)?,
        Command::Sde => commands::sde(&cfg, &cli.out, workers)?,
        Command::Stationary => commands::stationary(&cfg, &cli.out)?,
        Command::Compare => commands::compare(&cfg, &cli.out, workers)?,
    }
    // Wall time is diagnostic only; keeping it out of the artifacts keeps
    // reruns byte-identical.
    eprintln!(
        "lgas {}: done in {:.2}s",
        cli.command.name(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

/// Applies `f` to indices `0..n` across `workers` threads; results come back
/// ordered by index, so the assembly is deterministic for any worker count.
pub(crate) fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for (w, slice) in out.chunks_mut(chunk).enumerate() {
            handles.push(scope.spawn(move || -> Result<()> {
                for (j, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + j)?);
                }
                Ok(())
            }));
        }
        for h in handles {
            h.join()
                .map_err(|_| Error::Config("worker thread panicked".into()))??;
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|o| o.expect("all slots filled")).collect())
}
