use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use relbo::experiment::{run_experiment, Overrides};
use relbo::report::{write_report, Filter};
use relbo::score::{render, rescore};
use relbo::ExperimentConfig;

#[derive(Parser)]
#[command(name = "relbo", version, about = "Bayesian optimization for designs with minimal failure probability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) every repeat of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `budget.repeats`.
        #[arg(long)]
        repeats: Option<usize>,
        /// Overrides `budget.base_seed`; repeat `r` uses seed `S + r`.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of repeats run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Re-score the recommendations stored in a trace.
    Score {
        #[arg(long)]
        trace: PathBuf,
        /// Ground-truth sample size.
        #[arg(long, default_value_t = relbo_core::harness::SCORE_SAMPLES)]
        n_u: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate finished runs into curves, figures and a summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, num_args = 1..)]
        problems: Vec<String>,
        #[arg(long, num_args = 1..)]
        algorithms: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, repeats, seed, parallel } => {
            let cfg = Overrides { repeats, base_seed: seed }.apply(&ExperimentConfig::load(&config)?);
            let res = run_experiment(&cfg, &out, parallel)?;
            for r in &res.manifest.repeats {
                match (&r.error, r.final_p_true) {
                    (Some(e), _) => eprintln!("repeat {} (seed {}): failed: {e}", r.index, r.seed),
                    (None, Some(p)) => eprintln!("repeat {} (seed {}): final true failure probability {p:.4e}", r.index, r.seed),
                    (None, None) => eprintln!("repeat {} (seed {}): complete", r.index, r.seed),
                }
                for w in &r.warnings {
                    eprintln!("  warning: {w}");
                }
            }
            eprintln!("manifest: {}", res.manifest_path.display());
            Ok(res.ok())
        }
        Command::Score { trace, n_u, seed, out } => {
            let table = render(&rescore(&trace, n_u, seed)?);
            match out {
                Some(p) => std::fs::write(p, table)?,
                None => print!("{table}"),
            }
            Ok(true)
        }
        Command::Report { input, problems, algorithms, out } => {
            for p in write_report(&input, &Filter { problems, algorithms }, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}
