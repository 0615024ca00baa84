use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mfg_core::config::{load_config, Config};
use mfg_core::experiments::{
    certify, kernelcheck, run_longtime, run_single, run_sweep_with, write_certify,
    write_kernelcheck, write_longtime, write_single, write_sweep, CellVerdict,
};
use mfg_core::par::Execution;

#[derive(Parser)]
#[command(
    name = "mfg",
    version,
    about = "Mean-field game solver and phase-diagram harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    config: PathBuf,
    /// Output directory (default: runs/<command>-<UTC timestamp>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write fields and diagnostics.
    Solve(Common),
    /// Sweep the (sigma, T) grid of the [sweep] section.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Override the configured worker count (0: all cores, 1: sequential).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve for each horizon of the [longtime] section and tabulate D(T).
    Longtime(Common),
    /// Evaluate the non-existence and planning certificates without solving.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Search the moment center for the smallest horizon.
        #[arg(long)]
        optimize_shift: bool,
    },
    /// Tabulate fitted and analytic heat-kernel norm exponents.
    Kernelcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(out: Option<PathBuf>, command: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        Path::new("runs").join(format!("{command}-{stamp}"))
    })
}

fn load(path: &Path) -> Result<Config> {
    load_config(path).with_context(|| format!("invalid configuration {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(c) => {
            let cfg = load(&c.config)?;
            let dir = output_dir(c.out, "solve");
            let run = run_single(&cfg)?;
            write_single(&run, &dir)?;
            let o = &run.outcome;
            println!(
                "verdict {:?} after {} iterations, D = {:.6e}",
                o.verdict, o.iterations, o.d_final
            );
            if let Some(e) = &run.energy {
                println!("energy drift {:.3e}", e.drift);
            }
            if let Some(ts) = run.certificate.t_star {
                println!("non-existence horizon T* = {ts:.6}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Sweep { common, workers } => {
            let cfg = load(&common.config)?;
            let dir = output_dir(common.out, "sweep");
            let result = run_sweep_with(&cfg, workers.map(Execution::from_workers))?;
            write_sweep(&result, &dir)?;
            for label in [
                CellVerdict::Converged,
                CellVerdict::NonConvergent,
                CellVerdict::CertifiedNonexistentAndNonConvergent,
                CellVerdict::CertifiedNonexistentButConverged,
            ] {
                let n = result.cells.iter().filter(|c| c.verdict == label).count();
                println!("{:<42} {n}", label.as_str());
            }
            println!("wrote {}", dir.display());
        }
        Command::Longtime(c) => {
            let cfg = load(&c.config)?;
            let dir = output_dir(c.out, "longtime");
            let result = run_longtime(&cfg)?;
            write_longtime(&result, &dir)?;
            for r in &result.rows {
                println!(
                    "T = {:<8} D = {:.6e}  D/T = {:.6e}",
                    r.horizon, r.d_final, r.rescaled
                );
            }
            if let Some(ratio) = result.d_ratio {
                println!("max D / min D = {ratio:.4}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Certify {
            common,
            optimize_shift,
        } => {
            let cfg = load(&common.config)?;
            let dir = output_dir(common.out, "certify");
            let result = certify(&cfg, optimize_shift)?;
            write_certify(&result, &dir)?;
            let c = &result.nonexistence;
            match c.t_star {
                Some(ts) => println!("e0 = {:.6e}, T* = {ts:.6}", c.e0),
                None => println!("e0 = {:.6e}, no certificate", c.e0),
            }
            println!("wrote {}", dir.display());
        }
        Command::Kernelcheck { out } => {
            let dir = output_dir(out, "kernelcheck");
            let rows = kernelcheck()?;
            write_kernelcheck(&rows, &dir)?;
            for r in &rows {
                println!(
                    "N={} q={:<4} {:?}: analytic {:+.4} fitted {:+.4} ({})",
                    r.dim, r.exponent, r.kind, r.analytic_exponent, r.fitted_exponent, r.method
                );
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
