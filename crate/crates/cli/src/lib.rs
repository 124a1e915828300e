//! Command-line driver: runs the kernel experiments, writes CSV/JSON
//! reports with a gnuplot script each, and runs the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod invariants;
pub mod output;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Flags, Format, RunConfig};
use error::{CliError, Result};
use output::Document;

#[derive(Parser, Debug)]
#[command(name = "bergman-kit", version, about = "Bergman kernel experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalization a(N)^{-1} against P_κ(N) over an N sweep.
    AOfN(Flags),
    /// Kernel error sweep on a model, or on the torus when --tau is given.
    KernelError(Flags),
    /// Trace of the projector against the dimension.
    Trace(Flags),
    /// Coherent-state overlaps against their closed form (d = 1).
    Overlap(Flags),
    /// Full acceptance suite; writes report.json.
    Report(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AOfN(_) => "a-of-n",
            Command::KernelError(_) => "kernel-error",
            Command::Trace(_) => "trace",
            Command::Overlap(_) => "overlap",
            Command::Report(_) => "report",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::AOfN(f) | Command::KernelError(f) | Command::Trace(f) | Command::Overlap(f) | Command::Report(f) => f,
        }
    }
}

/// Runs a parsed command, printing progress to stdout; returns the path
/// of the written report.
pub fn run(cmd: &Command) -> Result<std::path::PathBuf> {
    let cfg = RunConfig::resolve(cmd.name(), cmd.flags())?;
    let stem = cmd.name().replace('-', "_");
    let doc = match cmd {
        Command::AOfN(_) => commands::a_of_n(&cfg)?,
        Command::KernelError(_) => commands::kernel_error(&cfg)?,
        Command::Trace(_) => commands::trace(&cfg)?,
        Command::Overlap(_) => commands::overlap(&cfg)?,
        Command::Report(_) => return report(&cfg),
    };
    let path = output::emit(&doc, &stem, cfg.format)?;
    println!("wrote {} (sha256 {})", path.display(), doc.content_hash());
    Ok(path)
}

fn report(cfg: &RunConfig) -> Result<std::path::PathBuf> {
    let results = acceptance::run_all(cfg, |r| println!("{}", r.line()));
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("criterion {} ({})", r.id, r.title))
        .collect();
    let experiments = results.iter().flat_map(|r| r.experiments.iter().cloned()).collect();
    let criteria: Vec<_> = results
        .iter()
        .map(|r| json!({ "id": r.id, "title": r.title, "passed": r.passed, "budget_seconds": r.budget_seconds, "checks": r.checks }))
        .collect();
    let summary = json!({ "all_passed": failed.is_empty(), "criteria": criteria });
    let doc = Document::new(cfg, experiments, summary);
    let path = output::emit(&doc, "report", Format::Json)?;
    println!("wrote {} (sha256 {})", path.display(), doc.content_hash());
    if failed.is_empty() {
        Ok(path)
    } else {
        Err(CliError::Acceptance(failed))
    }
}
