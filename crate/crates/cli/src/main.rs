mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Settings;
use config::{Precision, ScenarioConfig};

/// Failure classes, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration (exit 2).
    Config(String),
    /// The structure or the analysis was rejected by the library (exit 3).
    Model(reanalysis::Error),
    /// Output could not be written (exit 1).
    Io(String),
}

impl From<reanalysis::Error> for CliError {
    fn from(e: reanalysis::Error) -> Self {
        CliError::Model(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Model(e) => write!(f, "model error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "reanalyze",
    version,
    about = "Structural reanalysis by system reduction and preconditioned iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the configured model and write it as JSON.
    Generate(Common),
    /// Analyse one structure with each configured method.
    Solve(Common),
    /// Reanalyse the modified structure from the original one.
    Reanalyze(Common),
    /// Flop-ratio sweeps of the cost model.
    Flops(FlopsArgs),
    /// Load-controlled nonlinear runs of a bilinear truss.
    Nonlinear(Common),
    /// Timing campaign over the configured methods.
    Bench(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct FlopsArgs {
    /// Optional configuration with a `flops` block; defaults to both standard sweeps.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Output directory (default: the config's output.dir, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Timed repetitions; the median is reported.
    #[arg(long)]
    repeat: Option<usize>,
    /// Relative residual tolerance of the iterative methods.
    #[arg(long)]
    tol: Option<f64>,
    /// Float formatting of the CSV output.
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    /// Worker threads for the numerical kernels.
    #[arg(long, env = "REANALYZE_THREADS")]
    threads: Option<usize>,
}

fn settings(cfg: Option<&ScenarioConfig>, o: &Overrides) -> Result<Settings, CliError> {
    let s = Settings {
        out: o
            .out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from(".")),
        precision: o
            .precision
            .or(cfg.map(|c| c.output.precision))
            .unwrap_or_default(),
        repeat: o.repeat.or(cfg.map(|c| c.repeat)).unwrap_or(5),
        tol: o.tol.or(cfg.map(|c| c.solver.tol)).unwrap_or(1e-12),
    };
    if s.repeat == 0 {
        return Err(CliError::Config("--repeat must be at least 1".into()));
    }
    if !(s.tol > 0.0 && s.tol < 1.0) {
        return Err(CliError::Config(format!(
            "--tol must lie in (0, 1), got {}",
            s.tol
        )));
    }
    Ok(s)
}

fn apply_threads(o: &Overrides) {
    if let Some(t) = o.threads {
        reanalysis::linalg::set_thread_limit(t.max(1));
    }
}

fn load(c: &Common) -> Result<(ScenarioConfig, Settings), CliError> {
    apply_threads(&c.overrides);
    let cfg = ScenarioConfig::load(&c.config)?;
    let s = settings(Some(&cfg), &c.overrides)?;
    Ok((cfg, s))
}

fn print_table(table: &table::ResultTable, s: &Settings) {
    for r in &table.displacements {
        println!(
            "{:<13} node {:>6} dof {}  {}",
            r.method.name(),
            r.node,
            r.dof,
            table::fmt(r.value, s.precision)
        );
    }
}

fn wrote(s: &Settings, names: &[&str]) {
    for n in names {
        println!("wrote {}", s.out.join(n).display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Flops(a) => {
            apply_threads(&a.overrides);
            let cfg = a.config.as_deref().map(ScenarioConfig::load).transpose()?;
            let s = settings(cfg.as_ref(), &a.overrides)?;
            for p in commands::flops(cfg.as_ref(), &s)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Generate(c) => {
            let (cfg, s) = load(&c)?;
            for p in commands::generate(&cfg, &s)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Solve(c) => {
            let (cfg, s) = load(&c)?;
            print_table(&commands::solve(&cfg, &s)?, &s);
            wrote(&s, &["displacements.csv", "summary.csv"]);
        }
        Command::Reanalyze(c) => {
            let (cfg, s) = load(&c)?;
            print_table(&commands::reanalyze(&cfg, &s)?, &s);
            wrote(&s, &["displacements.csv", "summary.csv"]);
        }
        Command::Nonlinear(c) => {
            let (cfg, s) = load(&c)?;
            commands::nonlinear(&cfg, &s)?;
            wrote(&s, &["nonlinear.csv", "nonlinear_summary.csv"]);
        }
        Command::Bench(c) => {
            let (cfg, s) = load(&c)?;
            commands::bench(&cfg, &s)?;
            wrote(&s, &["bench.csv"]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reanalyze: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
