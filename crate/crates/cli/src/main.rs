use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfl_cli::{inputs, run_file, run_suite, scenario, to_json, write_atomic, CliError, CliResult, Kind, Overrides};

#[derive(Parser)]
#[command(name = "gfl", version, about = "Run operator-kernel and random-field scenarios and emit JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long = "tol-rank", global = true)]
    tol_rank: Option<f64>,

    /// Relative eigenvalue slack for positivity decisions.
    #[arg(long = "tol-psd", global = true)]
    tol_psd: Option<f64>,

    /// Relative slack for equality checks.
    #[arg(long = "tol-eq", global = true)]
    tol_eq: Option<f64>,

    /// Seed for every random choice; overrides the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Grid for inputs without their own: a JSON file or an inline JSON object.
    #[arg(long, global = true)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { scenario: PathBuf },
    /// Run every *.json scenario in a directory, in file-name order.
    Suite { dir: PathBuf },
    /// Factorize a kernel and check the round trip.
    Factorize { scenario: PathBuf },
    /// Check positive definiteness of a kernel.
    #[command(alias = "pd_check")]
    PdCheck { scenario: PathBuf },
    /// Compare the subordination criterion with domain inclusion.
    Subordination { scenario: PathBuf },
    /// Check distribution-field covariance identities.
    #[command(alias = "rdf_coherence")]
    RdfCoherence { scenario: PathBuf },
    /// Check measure covariance identities.
    #[command(alias = "measure_coherence")]
    MeasureCoherence { scenario: PathBuf },
    /// Estimate scalar and operator semivariations.
    Semivariation { scenario: PathBuf },
    /// Wold decomposition and its verification.
    Wold { scenario: PathBuf },
    /// Monte Carlo convergence of empirical kernels.
    Simulate { scenario: PathBuf },
}

fn grid_arg(arg: &str) -> CliResult<gfl_core::fields::Grid> {
    let value = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::Parse(format!("--grid: {e}")))?
    } else {
        scenario::read_json(Path::new(arg))?
    };
    inputs::grid(&value)
}

fn emit(out: Option<&Path>, json: &str) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    let c = &cli.common;
    let mut overrides = Overrides {
        rank_tol: c.tol_rank,
        psd_tol: c.tol_psd,
        eq_tol: c.tol_eq,
        seed: c.seed,
        grid: c.grid.as_deref().map(grid_arg).transpose()?,
        kind: None,
    };
    let (path, kind) = match cli.command {
        Command::Suite { dir } => {
            let summary = run_suite(&dir, &overrides)?;
            emit(c.out.as_deref(), &to_json(&summary))?;
            eprintln!(
                "{} scenarios: {} passed, {} failed, {} errored",
                summary.counts.total, summary.counts.passed, summary.counts.failed, summary.counts.errored
            );
            return Ok(summary.exit_code());
        }
        Command::Run { scenario } => (scenario, None),
        Command::Factorize { scenario } => (scenario, Some(Kind::Factorize)),
        Command::PdCheck { scenario } => (scenario, Some(Kind::PdCheck)),
        Command::Subordination { scenario } => (scenario, Some(Kind::Subordination)),
        Command::RdfCoherence { scenario } => (scenario, Some(Kind::RdfCoherence)),
        Command::MeasureCoherence { scenario } => (scenario, Some(Kind::MeasureCoherence)),
        Command::Semivariation { scenario } => (scenario, Some(Kind::Semivariation)),
        Command::Wold { scenario } => (scenario, Some(Kind::Wold)),
        Command::Simulate { scenario } => (scenario, Some(Kind::Simulate)),
    };
    overrides.kind = kind;
    let report = run_file(&path, &overrides)?;
    emit(c.out.as_deref(), &to_json(&report))?;
    if !report.pass {
        for clause in report.clauses.iter().filter(|c| !c.pass) {
            eprintln!("failed: {} (residual {:e}, tol {:e})", clause.name, clause.residual, clause.tol);
        }
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gfl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
