// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oqs_cli::config::ExperimentKind;
use oqs_cli::error::CliError;
use oqs_cli::{compare, run_file, RunOptions};

#[derive(Parser)]
#[command(name = "oqs", version, about = "Noisy Trotter simulations of the dissipative XYZ model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the configuration names.
    Run(RunArgs),
    SteadyState(RunArgs),
    GSweep(RunArgs),
    RSweep(RunArgs),
    MeanfieldPhase(RunArgs),
    Spectroscopy(RunArgs),
    MitigateCriticalPoint(RunArgs),
    /// Column-wise deviation between two result tables or run directories.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `output`, else $OQS_OUT_DIR/<kind>, else out/<kind>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Compare column LEFT of A with column RIGHT of B (repeatable).
    #[arg(long = "map", value_name = "LEFT=RIGHT")]
    map: Vec<String>,
    /// Fail with exit code 1 if any deviation exceeds this.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn run(args: RunArgs, expect: Option<ExperimentKind>) -> Result<u8, CliError> {
    let opts = RunOptions { out: args.out, workers: args.workers, seed: args.seed, expect };
    let rep = run_file(&args.config, &opts)?;
    println!("{} rows ({} failed) written to {}", rep.rows, rep.failures, rep.written.dir.display());
    Ok(if rep.failures > 0 { 3 } else { 0 })
}

fn compare_cmd(args: CompareArgs) -> Result<u8, CliError> {
    let map = compare::parse_map(&args.map)?;
    let cmp = compare::compare(&args.a, &args.b, &map)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&cmp)?);
    } else {
        println!("{:<24} {:<24} {:>14} {:>9} {:>11}", "left", "right", "max_abs", "compared", "mismatches");
        for c in &cmp.columns {
            println!("{:<24} {:<24} {:>14.6e} {:>9} {:>11}", c.left, c.right, c.max_abs, c.compared, c.mismatches);
        }
    }
    let over = args.tol.is_some_and(|t| cmp.max_abs() > t);
    Ok(if over || (args.tol.is_some() && cmp.mismatches() > 0) { 1 } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a, None),
        Command::SteadyState(a) => run(a, Some(ExperimentKind::SteadyState)),
        Command::GSweep(a) => run(a, Some(ExperimentKind::GSweep)),
        Command::RSweep(a) => run(a, Some(ExperimentKind::RSweep)),
        Command::MeanfieldPhase(a) => run(a, Some(ExperimentKind::MeanfieldPhase)),
        Command::Spectroscopy(a) => run(a, Some(ExperimentKind::Spectroscopy)),
        Command::MitigateCriticalPoint(a) => run(a, Some(ExperimentKind::MitigateCriticalPoint)),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
