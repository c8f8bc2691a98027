//! Command line front end: one subcommand per suite, shared flags, optional
//! config file. Everything observable happens in the library; this file only
//! parses arguments and routes output.
//!
//! Exit status: 0 when every trial and assertion passed, 1 on failed checks
//! or numerical breakdown (a partial report is still written), 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opint_cli::config::{self, PartialConfig};
use opint_cli::output::CsvTable;
use opint_cli::{logging, run_suite, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "opint",
    version,
    about = "Verification experiments for perturbation theory of operator functions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Matrix dimension (suite-specific default or sweep)
    #[arg(long)]
    n: Option<usize>,
    /// Number of random trials
    #[arg(long)]
    trials: Option<usize>,
    /// RNG seed; the report is a pure function of the full configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Schatten exponent, a number >= 1 or "inf"
    #[arg(long, value_parser = parse_p_flag)]
    p: Option<f64>,
    /// Hoelder exponent in (0, 1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Test function from the built-in library
    #[arg(long)]
    f: Option<String>,
    /// Tolerance override for the suite's main residual check
    #[arg(long)]
    tol: Option<f64>,
    /// Config file, key=value lines or a JSON object; flags win over it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table of the per-trial numbers
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Double-integral representation of f(A) - f(B)
    #[command(visible_alias = "doi-oracle")]
    DoiCheck(Common),
    /// Triple-integral routes and the Schatten-Hoelder bound
    MoiCheck(Common),
    /// Derivatives of t -> f(A + tK) against finite differences
    DerivativeCheck(Common),
    /// Higher-order differences: integral route vs binomial sum
    DifferenceCheck(Common),
    /// First-order trace formula with the spectral shift function
    Krein(Common),
    /// Taylor remainders: routes, decay order, trace bound
    Koplienko(Common),
    /// Lipschitz estimates for functions of operator pairs
    PairLipschitz(Common),
    /// The family where Lipschitz estimates fail, with exact norms
    Counterexample(Common),
    /// Operator Hoelder ratios of |x|^alpha across scales
    Holder(Common),
    /// Weighted singular value decay of f(A) - f(B)
    SingularDecay(Common),
    /// Dyadic window partition, band isolation, Besov norms
    BesovNorm(Common),
}

impl Cmd {
    fn split(self) -> (&'static str, Common) {
        match self {
            Cmd::DoiCheck(c) => ("doi-check", c),
            Cmd::MoiCheck(c) => ("moi-check", c),
            Cmd::DerivativeCheck(c) => ("derivative-check", c),
            Cmd::DifferenceCheck(c) => ("difference-check", c),
            Cmd::Krein(c) => ("krein", c),
            Cmd::Koplienko(c) => ("koplienko", c),
            Cmd::PairLipschitz(c) => ("pair-lipschitz", c),
            Cmd::Counterexample(c) => ("counterexample", c),
            Cmd::Holder(c) => ("holder", c),
            Cmd::SingularDecay(c) => ("singular-decay", c),
            Cmd::BesovNorm(c) => ("besov-norm", c),
        }
    }
}

fn parse_p_flag(v: &str) -> Result<f64, String> {
    config::parse_p(v).ok_or_else(|| format!("expected a number >= 1 or \"inf\", got {v:?}"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) | CliError::UnknownSuite(_) => ExitCode::from(2),
                CliError::Io(_) | CliError::Numerical(_) => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    logging::init()?;
    let (suite, common) = cli.cmd.split();

    let mut base = match &common.config {
        Some(path) => config::load_file(path)?,
        None => PartialConfig::default(),
    };
    // the subcommand fixes the suite; a config file may repeat it but not
    // point somewhere else
    if let Some(named) = &base.suite {
        let canon = if named == "doi-oracle" { "doi-check" } else { named.as_str() };
        if canon != suite {
            return Err(CliError::Config(format!(
                "config file names suite {named:?} but the command line runs {suite}"
            )));
        }
    }
    base.suite = Some(suite.to_string());

    let flags = PartialConfig {
        suite: None,
        n: common.n,
        trials: common.trials,
        seed: common.seed,
        p: common.p,
        alpha: common.alpha,
        f: common.f.clone(),
        tol: common.tol,
    };
    let cfg = ExperimentConfig::from_partial(base.overlay(&flags))?;
    let run = run_suite(&cfg)?;

    let json = run.report.to_json();
    match &common.out {
        Some(path) => std::fs::write(path, &json)?,
        None => print!("{json}"),
    }
    if let Some(path) = &common.csv {
        let table = run.csv.unwrap_or_else(|| CsvTable::from_trials(&run.report.trials));
        table.write_to(path)?;
    }
    Ok(run.report.all_passed())
}
