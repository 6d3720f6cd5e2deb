//! Command-line front end: sweeps, placement comparison, plots and the
//! self-check suite.
//!
//! Exit codes: 0 success, 1 failed validation, 2 bad configuration or
//! input, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsma_uav::harness::config::SweepSpec;
use rsma_uav::harness::sweep::{placement_report, run_sweep};
use rsma_uav::harness::validate::Validator;
use rsma_uav::harness::{plot, table};
use rsma_uav::parallel::Execution;
use rsma_uav::Error;

#[derive(Parser)]
#[command(name = "rsma-uav", version, about = "RSMA precoding and placement for a UAV base station")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write the result table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 runs sequentially, default all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write per-realization records here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compare the four placement strategies on one realization.
    Placement {
        #[arg(long)]
        config: PathBuf,
        /// Realization index to draw.
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Render a result table as an SVG line plot.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-check suite.
    Validate,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Sweep {
            config,
            out,
            seed,
            jobs,
            log,
        } => {
            let mut spec = SweepSpec::load(&config)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let result = run_sweep(&spec, Execution::from_jobs(jobs))?;
            table::write(&result.rows, &out)?;
            if let Some(log) = log {
                table::write_records(&result.records, &log)?;
            }
            eprintln!("wrote {} rows to {}", result.rows.len(), out.display());
            Ok(true)
        }
        Command::Placement { config, realization } => {
            let spec = SweepSpec::load(&config)?;
            let records = placement_report(&spec, realization)?;
            println!(
                "realization {realization}, SNR {} dB, R_th {} bps/Hz",
                spec.snr_db[0], spec.r_th[0]
            );
            println!("{:<14} {:>10} {:>10} {:>8}  {:<6} {:>12}", "strategy", "x", "y", "z", "scheme", "wsr");
            for r in records {
                let wsr = r.wsr.map_or("infeasible".to_string(), |w| format!("{w:.6e}"));
                println!(
                    "{:<14} {:>10.3} {:>10.3} {:>8.3}  {:<6} {:>12}",
                    r.strategy.as_str(),
                    r.position[0],
                    r.position[1],
                    r.position[2],
                    r.scheme.as_str(),
                    wsr
                );
            }
            Ok(true)
        }
        Command::Plot { input, out } => {
            plot::plot_file(&input, &out)?;
            Ok(true)
        }
        Command::Validate => {
            let outcomes = Validator::default().run()?;
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.ok()).count();
            println!("{} checks, {failed} failed", outcomes.len());
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
