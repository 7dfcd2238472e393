mod commands;
mod data;
mod error;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dip_core::harness::Scenario;
use dip_core::ParametricDistribution;

use commands::{AuditRequest, AuditTarget, Mechanism, PrivatizeRequest, SimulateRequest};
use error::CliError;

#[derive(Parser)]
#[command(name = "dip", version, about = "Distribution-invariant privatization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn ratio(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not strictly between 0 and 1")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Privatize a CSV file.
    Privatize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// TOML column schema.
        #[arg(long)]
        schema: PathBuf,
        /// Total privacy budget.
        #[arg(long, value_parser = positive)]
        eps: f64,
        #[arg(long, default_value_t = 0.25, value_parser = ratio)]
        holdout_ratio: f64,
        #[arg(long)]
        seed: u64,
        /// Comma-separated column names, first privatized first.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long, value_enum, default_value_t = Mechanism::Dip)]
        mechanism: Mechanism,
        /// Write release metadata as TOML.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a simulation scenario.
    Simulate {
        scenario: Scenario,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        eps: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, visible_alias = "N")]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = ratio)]
        holdout: Option<Vec<f64>>,
        /// e.g. `normal:0,1`, `poisson:3`.
        #[arg(long, value_delimiter = ';')]
        dist: Option<Vec<ParametricDistribution>>,
        #[arg(long)]
        rho: Option<f64>,
        /// Compare against reference values; exit 3 when outside tolerance.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check privacy invariants numerically.
    Audit {
        #[arg(value_enum)]
        target: AuditTarget,
        #[arg(long, value_delimiter = ',', value_parser = positive, default_value = "1")]
        eps: Vec<f64>,
        #[arg(long)]
        dist: Option<ParametricDistribution>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        sims: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
        releases: Vec<usize>,
        #[arg(long, default_value_t = 0.05, value_parser = ratio)]
        gamma: f64,
        #[arg(long, default_value_t = 10.0)]
        probe: f64,
        #[arg(long, default_value_t = 10_000)]
        nodes: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Suggest a schema for a CSV file.
    SchemaSuggest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Privatize {
            input,
            output,
            schema,
            eps,
            holdout_ratio,
            seed,
            order,
            mechanism,
            report,
        } => commands::privatize(&PrivatizeRequest {
            input,
            output,
            schema,
            epsilon: eps,
            holdout_ratio,
            seed,
            order,
            mechanism,
            report,
        }),
        Command::Simulate {
            scenario,
            reps,
            eps,
            seed,
            n,
            p,
            holdout,
            dist,
            rho,
            check,
            output,
            csv,
        } => commands::simulate(&SimulateRequest {
            scenario,
            reps,
            epsilons: eps,
            seed,
            n,
            p,
            holdout,
            distributions: dist,
            correlation: rho,
            check,
            output,
            csv,
        }),
        Command::Audit {
            target,
            eps,
            dist,
            seed,
            sims,
            releases,
            gamma,
            probe,
            nodes,
            output,
        } => commands::audit(&AuditRequest {
            target,
            epsilons: eps,
            distribution: dist,
            seed,
            sims,
            releases,
            gamma,
            probe,
            nodes,
            output,
        }),
        Command::SchemaSuggest { input, output } => commands::schema_suggest(&input, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
