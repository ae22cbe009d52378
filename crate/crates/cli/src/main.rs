use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ksstrip_cli::{keys_help, load, run_experiment, Experiment, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(
    name = "ksstrip",
    version,
    about = "Traveling-wave stability experiments for the Keller-Segel system on a strip",
    after_help = keys_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a traveling wave and report its identity residuals.
    #[command(after_help = keys_help())]
    Wave(RunArgs),
    /// Nonlinear eps = 0 stability run with energy ledger.
    #[command(after_help = keys_help())]
    Evolve(RunArgs),
    /// Linearized eps > 0 stability run.
    #[command(after_help = keys_help())]
    Linear(RunArgs),
    /// Decay of the transverse energy over an (eps, lambda) sweep.
    #[command(after_help = keys_help())]
    Planarity(RunArgs),
    /// Time-step refinement study.
    #[command(after_help = keys_help())]
    Convergence(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// INI configuration file; without it only overrides and defaults apply.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides such as `--grid.n_z 512` or `--wave.eps=0.1`, after all other options.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--SECTION.KEY VALUE"
    )]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Wave(a) => (Experiment::Wave, a),
        Command::Evolve(a) => (Experiment::Stability0, a),
        Command::Linear(a) => (Experiment::LinearEps, a),
        Command::Planarity(a) => (Experiment::Planarity, a),
        Command::Convergence(a) => (Experiment::Convergence, a),
    };
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let cfg = match load(text.as_deref(), &args.overrides, experiment) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("invalid configuration:\n{errors}");
            return ExitCode::from(2);
        }
    };
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from);
    match run_experiment(&cfg, &root) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!(
                "{}: {} (artifacts in {})",
                report.experiment.name(),
                if report.pass { "PASS" } else { "FAIL" },
                report.directory.display()
            );
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("{}: {e}", cfg.experiment.name());
            ExitCode::from(e.exit_code())
        }
    }
}
