//! `mixnorm`: run mixed-norm experiments described by JSON configurations.
//!
//! Exit codes: 0 on success, 2 when the configuration cannot be validated or
//! evaluated, 3 when a run violates an invariant (for example a sampled ratio
//! above a known operator norm), 1 for I/O failures while writing output.

mod commands;
mod config;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mixnorm_core::Strategy;

use config::{Experiment, ExperimentConfig, Format};
use report::{Outcome, Report, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "mixnorm", version, about = "Mixed-norm Lebesgue space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output format; defaults to the configuration's, then JSON
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refuse grids with more nodes than this
    #[arg(long, default_value_t = 100_000_000)]
    max_nodes: usize,
}

#[derive(Args, Debug, Clone)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of candidates
    #[arg(long)]
    budget: Option<usize>,
    /// Overrides the configured strategy: random, layered or ascent
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown strategy {s:?} (expected random, layered or ascent)"))
}

#[derive(Args, Debug, Clone)]
struct RefineArgs {
    #[command(flatten)]
    common: Common,
    /// Number of levels; each doubles the cells per axis
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Core,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Core)]
    suite: Suite,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mixed norm of the configured function
    Norm(Common),
    /// Apply a composition operator
    Compose(Common),
    /// Apply the Hardy averaging operator
    Hardy(Common),
    /// Apply a kernel product operator
    Product(Common),
    /// Apply a Hardy-Steklov operator
    Steklov(Common),
    /// Empirical lower bound for the operator norm
    Estimate(EstimateArgs),
    /// Norms of the operator output on growing truncation boxes
    Probe(Common),
    /// Repeat the experiment on successively doubled grids
    Refine(RefineArgs),
    /// Run the built-in property suite
    Verify(VerifyArgs),
}

enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

struct Loaded {
    experiment: Experiment,
    digest: String,
    format: Format,
    out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<Loaded> {
    let bytes = std::fs::read(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let text = std::str::from_utf8(&bytes).context("configuration is not UTF-8")?;
    let config = ExperimentConfig::from_json(text)?;
    let format = common.format.or(config.output.format).unwrap_or(Format::Json);
    let out = common.out.clone().or_else(|| config.output.path.clone());
    Ok(Loaded {
        experiment: Experiment::new(config, common.max_nodes)?,
        digest: report::digest(&bytes),
        format,
        out,
    })
}

fn execute(command: &Command) -> Result<(Outcome, Report, Format, Option<PathBuf>), Failure> {
    let start = Instant::now();
    let invalid = Failure::Invalid;
    let (name, loaded, seed, outcome) = match command {
        Command::Verify(args) => {
            let outcome = verify::run(args.seed).map_err(invalid)?;
            let report = Report {
                schema_version: SCHEMA_VERSION,
                command: "verify".into(),
                config_digest: None,
                seed: Some(args.seed),
                results: outcome.results.clone(),
                timings: report::Timings {
                    total_ms: start.elapsed().as_secs_f64() * 1e3,
                },
            };
            return Ok((outcome, report, args.format, args.out.clone()));
        }
        Command::Estimate(args) => {
            let loaded = load(&args.common).map_err(invalid)?;
            let spec = &loaded.experiment.config.estimate;
            let seed = args.seed.unwrap_or(spec.seed);
            let budget = args.budget.unwrap_or(spec.budget);
            let strategy = args.strategy.unwrap_or(spec.strategy);
            let outcome = commands::estimate(&loaded.experiment, seed, budget, strategy).map_err(invalid)?;
            ("estimate", loaded, Some(seed), outcome)
        }
        Command::Refine(args) => {
            let loaded = load(&args.common).map_err(invalid)?;
            let outcome = commands::refine(&loaded.experiment, args.levels).map_err(invalid)?;
            ("refine", loaded, None, outcome)
        }
        Command::Norm(c)
        | Command::Compose(c)
        | Command::Hardy(c)
        | Command::Product(c)
        | Command::Steklov(c)
        | Command::Probe(c) => {
            let loaded = load(c).map_err(invalid)?;
            let exp = &loaded.experiment;
            let (name, outcome) = match command {
                Command::Norm(_) => ("norm", commands::norm(exp)),
                Command::Compose(_) => ("compose", commands::apply(exp, &["composition", "identity"])),
                Command::Hardy(_) => ("hardy", commands::apply(exp, &["hardy"])),
                Command::Product(_) => ("product", commands::apply(exp, &["product"])),
                Command::Steklov(_) => ("steklov", commands::apply(exp, &["steklov"])),
                _ => ("probe", commands::probe(exp)),
            };
            (name, loaded, None, outcome.map_err(invalid)?)
        }
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: name.into(),
        config_digest: Some(loaded.digest.clone()),
        seed,
        results: outcome.results.clone(),
        timings: report::Timings {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };
    Ok((outcome, report, loaded.format, loaded.out))
}

/// Process status for a finished run, reporting failures on stderr.
fn status(result: &Result<Vec<String>, Failure>) -> u8 {
    match result {
        Ok(violations) if violations.is_empty() => 0,
        Ok(violations) => {
            for v in violations {
                eprintln!("invariant violation: {v}");
            }
            3
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            2
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli.command).and_then(|(outcome, report, format, out)| {
        let bytes = report::render(&report, outcome.table.as_ref(), format).map_err(Failure::Io)?;
        report::emit(&bytes, out.as_deref()).map_err(Failure::Io)?;
        Ok(outcome.violations)
    });
    ExitCode::from(status(&result))
}
