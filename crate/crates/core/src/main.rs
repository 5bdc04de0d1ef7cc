use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sr1pqn::harness::checks::standard_check_suite;
use sr1pqn::harness::expspec::load_spec;
use sr1pqn::harness::runner::{run_experiment, RunOptions};

#[derive(Parser)]
#[command(
    name = "sr1pqn",
    version,
    about = "Regularized proximal SR1 quasi-Newton benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment with trajectory audits and rate envelopes.
    Run(RunArgs),
    /// Run an experiment in timing mode: audits and reference solve off.
    Bench(RunArgs),
    /// Randomized property suite over the kernel, subproblem, and oracles.
    Check {
        /// Seed of the randomized trials.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description file (flat key-value text).
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Default: results/<spec file stem>.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the spec's stationarity tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn run_command(args: &RunArgs, audit: bool) -> ExitCode {
    let mut spec = match load_spec(&args.spec) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(tol) = args.tol {
        spec.tol = tol;
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| {
        let stem = args
            .spec
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".to_string());
        PathBuf::from("results").join(stem)
    });

    match run_experiment(&spec, &out_dir, &RunOptions { audit }) {
        Ok(outcome) => {
            match std::fs::read_to_string(&outcome.summary_path) {
                Ok(summary) => print!("{summary}"),
                Err(e) => eprintln!("error: summary unreadable: {e}"),
            }
            if outcome.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn check_command(seed: u64) -> ExitCode {
    let outcomes = standard_check_suite(seed);
    let mut all_pass = true;
    for c in &outcomes {
        all_pass &= c.pass;
        println!(
            "{} {} ({} instances, worst excess {:.3e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.checked,
            c.worst_excess
        );
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_command(&args, true),
        Command::Bench(args) => run_command(&args, false),
        Command::Check { seed } => check_command(seed),
    }
}
