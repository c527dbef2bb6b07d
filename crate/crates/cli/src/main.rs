use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use singular_langevin::config::RunConfig;
use singular_langevin::experiments::{self, ExperimentReport};
use singular_langevin::measures::{write_histogram, HistogramRow};
use singular_langevin::Error;

#[derive(Parser)]
#[command(name = "slangevin", version, about = "Singular Langevin dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.json and any CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory written to timeseries.csv.
    Simulate { config: PathBuf },
    /// Long-run momentum marginal against the invariant measure.
    Ergodicity { config: PathBuf },
    /// Classical dynamics against the overdamped limit as the mass shrinks.
    SmallMass { config: PathBuf },
    /// Relativistic dynamics against the Newtonian limit as ε shrinks.
    Newtonian { config: PathBuf },
    /// Random-trial inequality checks; the config only supplies `seed` and `trials`.
    Lemmas { config: Option<PathBuf> },
    /// Sample-plan certificate of the Lyapunov drift condition.
    CertifyDrift { config: PathBuf },
    /// Growth and singularity assumptions of the configured potentials.
    AuditPotentials { config: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Kind { .. } | Error::Shape(_) | Error::InvalidArgument(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: &Cli) -> Result<ExperimentReport, Failure> {
    fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    let report = match &cli.command {
        Command::Simulate { config } => {
            let rc = load(config, cli.seed)?;
            let path = cli.out.join("timeseries.csv");
            let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
            let (report, _) = experiments::run_simulate(
                &rc.model()?,
                &rc.specs()?,
                &rc.initial_state()?,
                rc.horizon,
                u64::from(rc.output_stride),
                rc.exit_radius,
                BufWriter::new(file),
            )?;
            report
        }
        Command::Ergodicity { config } => {
            let rc = load(config, cli.seed)?;
            let report =
                experiments::run_ergodicity(&rc.model()?, &rc.specs()?, &rc.initial_state()?, &rc.ergodicity_params()?)?;
            if let Some(h) = report.metrics.get("histogram") {
                let rows: Vec<HistogramRow> =
                    serde_json::from_value(h.clone()).map_err(|e| Failure::Runtime(e.to_string()))?;
                let path = cli.out.join("histogram.csv");
                let mut file = BufWriter::new(File::create(&path).map_err(|e| io_failure(&path, e))?);
                write_histogram(&mut file, &rows)?;
            }
            report
        }
        Command::SmallMass { config } => {
            let rc = load(config, cli.seed)?;
            experiments::run_small_mass(&rc.model()?, &rc.specs()?, &rc.initial_state()?, &rc.small_mass_params())?
        }
        Command::Newtonian { config } => {
            let rc = load(config, cli.seed)?;
            experiments::run_newtonian(&rc.model()?, &rc.specs()?, &rc.initial_state()?, &rc.newtonian_params())?
        }
        Command::Lemmas { config } => {
            let (seed, trials) = match config {
                Some(path) => {
                    let rc = load(path, cli.seed)?;
                    (rc.seed, rc.lemma_trials())
                }
                None => (cli.seed.unwrap_or(0), 10_000),
            };
            experiments::lemma_suite(seed, trials)?
        }
        Command::CertifyDrift { config } => {
            let rc = load(config, cli.seed)?;
            experiments::run_certify(&rc.model()?, &rc.specs()?, &rc.certify_params()?)?
        }
        Command::AuditPotentials { config } => {
            let rc = load(config, cli.seed)?;
            experiments::run_audit(&rc.specs()?, &rc.audit_params(), rc.seed)?
        }
    };
    let path = cli.out.join("report.json");
    fs::write(&path, report.to_json()).map_err(|e| io_failure(&path, e))?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for c in &report.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                println!("{mark} {}: {:e} (threshold {:e})", c.name, c.value, c.threshold);
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("slangevin: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("slangevin: {msg}");
            ExitCode::from(1)
        }
    }
}
