use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gradlat::config::{Experiment, RawConfig};
use gradlat::{run, Action};

/// Monte Carlo experiments for the auxiliary-field gradient lattice model.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// TOML configuration with dotted sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides chain.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// sample | stable-check | ward | moments | scaling | rcm
    #[arg(long)]
    experiment: Option<Experiment>,
    /// Continue a sample-experiment checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Sweeps to run (total for a fresh sample run, extra when resuming).
    #[arg(long)]
    sweeps: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match drive(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn drive(args: Args) -> Result<i32, gradlat::RunError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    if let Some(seed) = args.seed {
        raw.chain.seed = Some(seed);
    }
    if let Some(out) = args.out {
        raw.output.dir = out;
    }
    if let Some(e) = args.experiment {
        raw.experiment = Some(e);
    }
    if args.resume.is_some() && raw.experiment.is_none() {
        raw.experiment = Some(Experiment::Sample);
    }
    let cfg = raw.validate()?;
    let action = match args.resume {
        Some(checkpoint) => Action::Resume {
            checkpoint,
            sweeps: args.sweeps.unwrap_or(0),
        },
        None => Action::Fresh { sweeps: args.sweeps },
    };
    let summary = run(&cfg, &action)?;
    for (side, r) in &summary.reports {
        println!("{:<32} N={:<3} {:<12} estimate={} target={}", r.name, side, r.verdict.as_str(), r.estimate, r.bound_or_target);
    }
    println!("{} -> {} ({})", cfg.experiment, summary.out_dir.display(), summary.verdict);
    Ok(summary.exit_status)
}
