mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use critcause::engine::Route;
use critcause::metrics::AggregateMode;

/// Causal-relation analysis for criticality phenomena.
///
/// Models may be given as file paths or as `fixture:<name>` for a shipped
/// fixture (heavy-rain-reality, heavy-rain-model, friction-relation).
///
/// Exit codes: 0 clean, 1 validation failure or domain finding, 2 usage,
/// I/O or parse error.
#[derive(Debug, Parser)]
#[command(name = "critcause", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file against the causal-relation clauses.
    Validate {
        model: String,
        /// Also check an observed record (JSON) against the context.
        #[arg(long)]
        record: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// List back-door adjustment sets for the effect of X on Y.
    Adjust {
        model: String,
        /// Cause node; defaults to the phenomenon variable.
        x: Option<String>,
        /// Effect node; defaults to the metric.
        y: Option<String>,
        #[arg(long, default_value_t = 16)]
        max: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Interventional distribution and expectation of a target.
    Effect {
        model: String,
        /// Intervention `node=label[,node=label...]`; empty means observational.
        #[arg(long = "do", default_value = "")]
        intervention: String,
        /// Defaults to the metric.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = Route::Auto)]
        route: Route,
        #[command(flatten)]
        out: Output,
    },
    /// ACE, RCE, sigma and the divergence indicators of a model pair.
    Indicators {
        /// Assumed reality.
        reference: String,
        /// Model under plausibilization.
        candidate: String,
        /// Comma-separated node set N; defaults to all observed nodes.
        #[arg(long, value_delimiter = ',')]
        set: Vec<String>,
        /// Re-estimate both models from these CSV files (reference first).
        #[arg(long, num_args = 2, value_names = ["REF_CSV", "CAND_CSV"])]
        data: Vec<PathBuf>,
        /// Additive smoothing used when re-estimating.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Report divergences in bits instead of nats.
        #[arg(long)]
        bits: bool,
        #[arg(long, value_enum, default_value_t = Rho3Arg::FullGraph)]
        rho3: Rho3Arg,
        #[command(flatten)]
        out: Output,
    },
    /// Forward-sample a fully instantiated model to CSV.
    Sample {
        model: String,
        #[arg(short = 'n', long = "count")]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Brake and steer threat numbers of a driving task.
    Metrics {
        /// `t x y` trajectory files; repeat for each candidate trajectory.
        #[arg(long = "trajectories", num_args = 1.., required = true)]
        trajectories: Vec<PathBuf>,
        /// Available-acceleration field file.
        #[arg(long)]
        field: PathBuf,
        /// Comma-separated bin edges for discretizing the aggregate.
        #[arg(long, value_delimiter = ',')]
        edges: Vec<f64>,
        /// Comma-separated bin labels; one more than the edges.
        #[arg(long, value_delimiter = ',', requires = "edges")]
        labels: Vec<String>,
        #[arg(long, default_value_t = AggregateMode::Max)]
        agg: AggregateMode,
        #[command(flatten)]
        out: Output,
    },
    /// Effect of a safety principle on the phenomenon and the metric.
    Sp {
        model: String,
        /// Intervention `node=label[,node=label...]`.
        #[arg(long = "sp")]
        intervention: String,
        #[arg(long, default_value = "sp")]
        name: String,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rho3Arg {
    FullGraph,
    RestrictToN,
}

#[derive(Debug, Clone, Copy, Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

/// Why a command did not finish cleanly.
#[derive(Debug)]
enum Failure {
    /// Validation failure or analytic finding; exit 1.
    Finding(String),
    /// Bad invocation, unreadable or malformed input; exit 2.
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Finding(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Finding(msg) | Failure::Usage(msg) if !msg.is_empty() => eprintln!("error: {msg}"),
                _ => {}
            }
            ExitCode::from(failure.code())
        }
    }
}
