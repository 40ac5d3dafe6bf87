use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use reflectionless::cli_harness::{self, ExperimentConfig, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "reflect", version, about = "Spectral and dynamical reflection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection reports over an energy (or angle) grid.
    Scan(RunArgs),
    /// Dynamical reflection runs and completeness audits.
    Dynamics(RunArgs),
    /// Window-averaged spectral reflection against the dynamical estimate.
    Compare(RunArgs),
    /// Stone matrix by two routes.
    AuditStone(RunArgs),
    /// Parseval identity of the eigenfunction transform.
    AuditParseval(RunArgs),
    /// Wronskians, recurrences, unitarity, commutators and transform round trips.
    AuditInvariants(RunArgs),
    /// Whatever mode the config names.
    Run(RunArgs),
    /// Aggregate the manifests under a directory.
    Summarize {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory (default: the config's `outputs.dir`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: &RunArgs, expect: Option<Mode>) -> Result<bool> {
    let cfg = ExperimentConfig::from_path(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(mode) = expect {
        if cfg.mode != mode {
            bail!(
                "{} has mode {}; this subcommand runs {}",
                args.config.display(),
                cfg.mode.as_str(),
                mode.as_str()
            );
        }
    }
    if args.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let opts = RunOptions {
        workers: args.workers,
        seed: args.seed,
    };
    let outcome = cli_harness::run(&cfg, &opts)?;
    cli_harness::write_outcome(&outcome, &dir).with_context(|| format!("writing {}", dir.display()))?;
    let m = &outcome.manifest;
    println!(
        "{} [{}]: {} checks, {} failed, {} errors, {} excluded points -> {}",
        m.name,
        m.mode,
        m.checks.len(),
        m.failed_checks().count(),
        m.failures.len(),
        m.excluded.len(),
        dir.display()
    );
    for c in m.failed_checks() {
        let at = c.at.as_deref().map(|a| format!(" @ {a}")).unwrap_or_default();
        println!("  FAIL {} [{}{at}]: {:.4e} vs {:?} {:.4e}", c.name, c.model, c.value, c.relation, c.limit);
    }
    for f in &m.failures {
        let at = f.at.as_deref().map(|a| format!(" @ {a}")).unwrap_or_default();
        println!("  ERROR [{}{at}]: {}", f.model, f.error);
    }
    println!("{}", if m.passed { "PASS" } else { "FAIL" });
    Ok(m.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scan(a) => execute(a, Some(Mode::SpectralScan)),
        Command::Dynamics(a) => execute(a, Some(Mode::Dynamics)),
        Command::Compare(a) => execute(a, Some(Mode::Compare)),
        Command::AuditStone(a) => execute(a, Some(Mode::StoneAudit)),
        Command::AuditParseval(a) => execute(a, Some(Mode::ParsevalAudit)),
        Command::AuditInvariants(a) => execute(a, Some(Mode::InvariantAudit)),
        Command::Run(a) => execute(a, None),
        Command::Summarize { dir } => cli_harness::summarize(dir)
            .map(|s| {
                print!("{}", s.table());
                s.passed
            })
            .map_err(anyhow::Error::from),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
