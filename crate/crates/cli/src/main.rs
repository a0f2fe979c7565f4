use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use debtscale_core::experiment::{
    compare_dirs, emit_csv, load_profile, run_on_trace, ExperimentConfig, PolicyKind, WorkloadSource,
};
use debtscale_core::workload::{generate_trace, serialize_trace};
use debtscale_core::QTable;

#[derive(Parser)]
#[command(name = "debtscale", version, about = "Cloud elasticity simulator with debt-aware autoscaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        policy: Option<PolicyKind>,
        /// Replace the configured workload with this trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start the debt-aware policy from a saved q-table.
        #[arg(long)]
        qtable_in: Option<PathBuf>,
    },
    /// Compare the summaries of two run directories (A relative to B).
    Compare { a: PathBuf, b: PathBuf },
    /// Generate a trace file from a rate profile.
    GenTrace {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Trace length in seconds; defaults to the profile's duration.
        #[arg(long)]
        duration: Option<f64>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            policy,
            trace,
            out,
            qtable_in,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(policy) = policy {
                cfg.policy = policy;
                cfg.record_debt |= policy == PolicyKind::DebtAware;
            }
            if let Some(trace) = trace {
                cfg.workload = WorkloadSource::Trace(trace);
            }
            cfg.validate()?;
            let Some(out) = out.or_else(|| cfg.output_dir.clone()) else {
                bail!("no output directory: pass --out or set output_dir");
            };
            let qtable = match qtable_in {
                Some(path) if cfg.policy == PolicyKind::DebtAware => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("{}", path.display()))?;
                    Some(QTable::from_csv(&text).with_context(|| format!("{}", path.display()))?)
                }
                Some(_) => bail!("--qtable-in only applies to the debt-aware policy"),
                None => None,
            };
            let workload = cfg.load_workload()?;
            let report = run_on_trace(&cfg, &workload, qtable)?;
            emit_csv(&report, &out)?;
            for (k, v) in report.summary() {
                println!("{k}: {v}");
            }
            println!("wall_clock_s: {:.3}", report.wall_clock);
            println!("output: {}", out.display());
        }
        Command::Compare { a, b } => {
            print!("{}", compare_dirs(&a, &b)?);
        }
        Command::GenTrace {
            profile,
            seed,
            out,
            duration,
        } => {
            let WorkloadSource::Profile {
                profile: rates,
                duration: default_duration,
            } = load_profile(&profile)?
            else {
                unreachable!("load_profile yields a profile source");
            };
            let Some(duration) = duration.or(default_duration) else {
                bail!("{}: no duration; pass --duration", profile.display());
            };
            let trace = generate_trace(&rates, duration, seed)?;
            std::fs::write(&out, serialize_trace(&trace)).with_context(|| format!("{}", out.display()))?;
            println!("{} requests over {duration} s written to {}", trace.len(), out.display());
        }
    }
    Ok(())
}
