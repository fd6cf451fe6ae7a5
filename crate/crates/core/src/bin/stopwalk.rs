use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stopwalk::harness::{self, Experiment, ExperimentConfig, Verdict, VerificationReport};
use stopwalk::transform::transformed_measure_exact;
use stopwalk::{expectation_estimate, Error, PrngStream};

const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "stopwalk",
    version,
    about = "Random walks transformed by Markov stopping times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy scaling `h(μ_τ)` against `E(τ)·h(μ)`.
    Entropy(Common),
    /// Escape-rate scaling `ℓ(μ_τ)` against `E(τ)·ℓ(μ)`.
    Escape(Common),
    /// Exact transformed measure as JSON on standard output.
    Transform(Common),
    /// Monte Carlo `E(τ)` as JSON on standard output.
    Expectation(Common),
    /// Runs the experiment named in the config.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// CSV report destination.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Relative tolerance, overriding the config.
    #[arg(long, value_name = "FLOAT")]
    tolerance: Option<f64>,
}

enum Failure {
    Usage(String),
    Inconclusive(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Truncation { .. }
            | Error::AllCensored(_)
            | Error::VisitedAtomDropped(_)
            | Error::ZeroHittingFrequency(_) => Failure::Inconclusive(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", common.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.tolerance {
        cfg.tolerance.relative = t;
    }
    cfg.validate()?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn write_report(out: Option<&Path>, report: &VerificationReport) -> Result<(), Failure> {
    if let Some(path) = out {
        let file = File::create(path).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
        harness::write_csv(BufWriter::new(file), std::slice::from_ref(report))?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(stdout).map_err(|e| Failure::Usage(e.to_string()))
}

fn experiment(common: &Common, kind: Option<Experiment>) -> Result<Verdict, Failure> {
    let mut cfg = load(common)?;
    if let Some(kind) = kind {
        cfg.experiment = kind;
        cfg.validate()?;
    }
    let report = harness::run(&cfg)?;
    write_report(common.out.as_deref(), &report)?;
    println!("{}", report.summary());
    Ok(report.verdict)
}

fn transform(common: &Common) -> Result<Verdict, Failure> {
    let cfg = load(common)?;
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    let p = &cfg.params;
    let result = transformed_measure_exact(&rule, &mu, p.transform_horizon, p.support_cap)?;
    print_json(&result.to_json())?;
    Ok(Verdict::Pass)
}

fn expectation(common: &Common) -> Result<Verdict, Failure> {
    let cfg = load(common)?;
    let mu = cfg.build_measure()?;
    let rule = cfg.build_rule()?;
    let p = &cfg.params;
    let est = expectation_estimate(
        &rule,
        &mu,
        p.expectation_paths,
        p.horizon,
        &PrngStream::new(cfg.seed, 0),
    )?;
    print_json(&est)?;
    Ok(if est.censored_mass > harness::CENSOR_BUDGET {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Entropy(c) => experiment(c, Some(Experiment::EntropyScaling)),
        Command::Escape(c) => experiment(c, Some(Experiment::EscapeScaling)),
        Command::Transform(c) => transform(c),
        Command::Expectation(c) => expectation(c),
        Command::Verify(c) => experiment(c, None),
    };
    match outcome {
        Ok(v) => ExitCode::from(v.exit_code() as u8),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Inconclusive(msg)) => {
            println!("INCONCLUSIVE {msg}");
            ExitCode::from(Verdict::Inconclusive.exit_code() as u8)
        }
    }
}
