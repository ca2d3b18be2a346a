//! `odq` - stationary analysis of discrete-time queues with overdispersed
//! (Gamma-Poisson) demand.
//!
//! Subcommands: `table` regenerates the published result tables, `hedge`
//! emits the corrected-hedge convergence curves, `compare` runs every
//! enabled engine on one instance, and `roots` dumps the in-disk zeros from
//! both root finders.

mod render;
mod report;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const CSV_SCHEMAS: &str = "CSV schemas (fixed column names and order):\n  \
table:   s,rho,eq_exact,eq_classical,eq_robust,sd_exact,sd_classical,sd_robust,status\n  \
hedge:   delta,n,beta_ratio,sigma_ratio\n  \
compare: method,status,mean,variance,sd,p0,err_mean,err_variance,err_p0\n  \
roots:   k,fp_re,fp_im,fp_residual,fp_iterations,bl_re,bl_im,bl_residual,bl_status\n\n\
Numbers in csv/json carry full double precision (17 significant digits);\n\
markdown rounds to 3 decimals (half-even), matching the published layout.\n\
The table dispersion columns reproduce the published tables' normalization,\n\
which equals the fourth root of the stationary variance; `compare` reports\n\
the moment-true standard deviation. Exit codes: 0 success, 2 validation\n\
error, 3 numerical failure.";

#[derive(Parser, Debug)]
#[command(name = "odq", version, about, after_long_help = CSV_SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Markdown,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regenerate a published-style result table over a capacity list.
    Table(TableArgs),
    /// Convergence curves of the corrected hedge and scale ratios.
    Hedge(HedgeArgs),
    /// Run every enabled method on a single instance and cross-check.
    Compare(CompareArgs),
    /// In-disk zeros of z^s - pgf(z) from both root finders.
    Roots(RootsArgs),
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    /// Variability hedge beta of the capacity rule s = n + beta n^delta.
    #[arg(long)]
    beta: f64,
    /// Dispersion exponent delta in (1/2, 1).
    #[arg(long)]
    delta: f64,
    /// Capacities, comma separated, e.g. 5,10,50,100,500.
    #[arg(long = "s-list", value_delimiter = ',', required = true)]
    s_list: Vec<u32>,
    /// Series tolerance for the exact engine.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// Write to this path instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct HedgeArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Dispersion exponents for the curve family.
    #[arg(long = "delta", value_delimiter = ',', default_values_t = [0.6, 0.75, 0.9])]
    delta: Vec<f64>,
    #[arg(long = "n-min", default_value_t = 2.0)]
    n_min: f64,
    #[arg(long = "n-max", default_value_t = 200.0)]
    n_max: f64,
    #[arg(long = "n-step", default_value_t = 1.0)]
    n_step: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    /// Instance capacity.
    #[arg(long)]
    s: u32,
    /// Regime hedge (with --delta); mutually exclusive with --a/--b.
    #[arg(long, conflicts_with_all = ["a", "b"], requires = "delta")]
    beta: Option<f64>,
    #[arg(long, requires = "beta")]
    delta: Option<f64>,
    /// Raw Gamma shape (with --b).
    #[arg(long, requires = "b")]
    a: Option<f64>,
    /// Raw Gamma scale (with --a).
    #[arg(long, requires = "a")]
    b: Option<f64>,
    /// Methods to run, comma separated. Default: all seven.
    #[arg(long, value_delimiter = ',', default_values_t = [
        "spitzer".to_string(), "pollaczek".to_string(), "roots".to_string(),
        "markov".to_string(), "montecarlo".to_string(), "classical".to_string(),
        "robust".to_string(),
    ])]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Simulation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RootsArgs {
    #[arg(long)]
    s: u32,
    #[arg(long, conflicts_with_all = ["a", "b"], requires = "delta")]
    beta: Option<f64>,
    #[arg(long, requires = "beta")]
    delta: Option<f64>,
    #[arg(long, requires = "b")]
    a: Option<f64>,
    #[arg(long, requires = "a")]
    b: Option<f64>,
    /// Fixed-point displacement tolerance.
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 200_000)]
    max_iter: u32,
    /// Buermann-Lagrange series length.
    #[arg(long, default_value_t = 20_000)]
    terms: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

/// Failures split by exit code: 2 for bad requests, 3 for numerics.
enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<odq_core::Error> for CliError {
    fn from(e: odq_core::Error) -> Self {
        use odq_core::Error::*;
        match e {
            Underdispersed { .. }
            | InvalidParameter(_)
            | Unstable { .. }
            | NoRegimeRoot { .. }
            | InvalidConfig(_)
            | OutsideDomain(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Table(args) => report::run_table(&args),
        Command::Hedge(args) => report::run_hedge(&args),
        Command::Compare(args) => report::run_compare(&args),
        Command::Roots(args) => report::run_roots(&args),
    };
    match outcome {
        Ok(report) => {
            if let Err(e) = emit(&report.text, report.out.as_deref()) {
                eprintln!("odq: {e}");
                return ExitCode::from(3);
            }
            if report.numerical_failures {
                eprintln!("odq: one or more methods failed; see the status column");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("odq: invalid request: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("odq: numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn emit(text: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
        }
    }
}
