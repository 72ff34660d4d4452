//! Command line front end: `pushpull <rate|normality|coverage|validate|ground-truth>`.
//!
//! Exit codes: 0 success, 1 experiment-level failure, 2 usage or config
//! error. Every run echoes its resolved configuration into the output
//! directory, and identical config plus seed reproduce output files byte
//! for byte.

use crate::config::{apply_overrides, parse_override, ConfigError, ExperimentConfig};
use crate::report::{
    run_coverage, run_ground_truth, run_normality, run_rate, run_validate, ReportError,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "pushpull",
    version,
    about = "Stochastic push-pull gradient tracking experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean-square error trajectories of push-pull, DSGT, and DSGD.
    Rate(RunArgs),
    /// Normality statistics of the averaged iterates plus KS report.
    Normality(RunArgs),
    /// Confidence-region coverage rates with the plug-in estimator.
    Coverage(RunArgs),
    /// Check network, weight, and schedule assumptions.
    Validate(RunArgs),
    /// Analytic optimum and Monte Carlo limit covariance.
    GroundTruth(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override experiment.base_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override experiment.parallelism (0 = all cores).
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Dotted-path config override, e.g. schedule.a=0.1 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
}

enum Failure {
    /// Exit 2: bad usage or configuration.
    Config(String),
    /// Exit 1: the experiment itself failed.
    Experiment(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Experiment(other.to_string()),
        }
    }
}

fn load_config(
    args: &RunArgs,
    defaults: ExperimentConfig,
    kind: Option<&str>,
) -> Result<ExperimentConfig, Failure> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("config not found: {}: {e}", path.display()))
            })?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Failure::Config(format!("config parse error: {e}")))?
        }
        None => serde_json::to_value(&defaults).expect("defaults serialize"),
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(seed) = args.seed {
        overrides.push(("experiment.base_seed".into(), seed.to_string()));
    }
    if let Some(par) = args.parallelism {
        overrides.push(("experiment.parallelism".into(), par.to_string()));
    }
    for spec in &args.overrides {
        overrides.push(parse_override(spec)?);
    }
    apply_overrides(&mut doc, &overrides)?;

    let mut cfg = ExperimentConfig::from_json_str(&doc.to_string())?;
    if let Some(kind) = kind {
        match &cfg.experiment.kind {
            None => cfg.experiment.kind = Some(kind.to_string()),
            Some(k) if k == kind => {}
            Some(k) => {
                return Err(Failure::Config(format!(
                    "config kind {k:?} does not match subcommand {kind:?}"
                )))
            }
        }
    }
    Ok(cfg)
}

fn require_network(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cfg.graph.n < 2 {
        return Err(Failure::Config(format!(
            "network experiments need graph.n >= 2, got {}",
            cfg.graph.n
        )));
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Rate(args) => {
            let cfg = load_config(args, ExperimentConfig::study_rate(), Some("rate"))?;
            require_network(&cfg)?;
            let outcome = run_rate(&cfg, &args.out)?;
            if !args.quiet {
                println!(
                    "rate: {} replications, {} diverged",
                    outcome.summary.replications, outcome.summary.diverged
                );
                for (alg, slope) in &outcome.slopes {
                    match slope {
                        Some(s) => println!("  {}: weighted-error tail slope {s:.4}", alg.name()),
                        None => println!("  {}: slope unavailable", alg.name()),
                    }
                }
                println!(
                    "wrote rate_curves.csv, rate_summary.json to {}",
                    args.out.display()
                );
            }
            Ok(())
        }
        Command::Normality(args) => {
            let cfg = load_config(args, ExperimentConfig::study_normality(), Some("normality"))?;
            require_network(&cfg)?;
            let outcome = run_normality(&cfg, &args.out)?;
            if !args.quiet {
                if outcome.ks_skipped {
                    println!("normality: too few replications for a KS test (warning)");
                } else {
                    for t in &outcome.tests {
                        println!(
                            "  {} component {}: D={:.4} critical={:.4} -> {}",
                            t.series,
                            t.component,
                            t.d_stat,
                            t.critical_5pct,
                            if t.pass { "pass" } else { "fail" }
                        );
                    }
                }
                println!(
                    "wrote normality_samples.csv, normality_report.json to {}",
                    args.out.display()
                );
            }
            Ok(())
        }
        Command::Coverage(args) => {
            let cfg = load_config(args, ExperimentConfig::study_coverage(), Some("coverage"))?;
            require_network(&cfg)?;
            let outcome = run_coverage(&cfg, &args.out)?;
            if !args.quiet {
                for c in &outcome.summary.coverage {
                    println!(
                        "  k={}: PI {:.1}% PIave {:.1}%",
                        c.k,
                        100.0 * c.pi_rate(),
                        100.0 * c.piave_rate()
                    );
                }
                println!(
                    "wrote coverage_table.csv, coverage_summary.json to {}",
                    args.out.display()
                );
            }
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = load_config(args, ExperimentConfig::study_rate(), None)?;
            require_network(&cfg)?;
            let outcome = run_validate(&cfg, Some(&args.out))?;
            if !args.quiet {
                print!("{}", outcome.text);
                for w in &outcome.warnings {
                    println!("warning: {w}");
                }
            }
            if outcome.passed {
                Ok(())
            } else {
                Err(Failure::Experiment("assumption checks failed".into()))
            }
        }
        Command::GroundTruth(args) => {
            let cfg = load_config(args, ExperimentConfig::study_rate(), None)?;
            let outcome = run_ground_truth(&cfg, &args.out)?;
            if !args.quiet {
                let xs: Vec<String> = outcome
                    .ground_truth
                    .x_star
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect();
                println!("x_star = [{}]", xs.join(", "));
                println!(
                    "S max standard error = {:.4e} over {} samples",
                    outcome.ground_truth.s_standard_error.amax(),
                    outcome.ground_truth.mc_samples
                );
                for w in &outcome.warnings {
                    println!("warning: {w}");
                }
                println!("wrote ground_truth.json to {}", args.out.display());
            }
            Ok(())
        }
    }
}

/// Entry point of the `pushpull` binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(Failure::Experiment(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
