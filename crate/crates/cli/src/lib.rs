//! `semiso`: generate responses, embed them, score isotropy and factuality,
//! and evaluate how well isotropy predicts factuality.

mod commands;
pub mod config;
mod data;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use semiso_core::par::Exec;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "semiso", version, about = "Semantic isotropy vs. factuality pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "semiso.toml")]
    pub config: PathBuf,
    /// Embedding provider name from the config.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Comma-separated measures, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n_boot: Option<usize>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory of oracle transcripts used instead of a live oracle.
    #[arg(long, global = true)]
    pub stub_oracle: Option<PathBuf>,
    /// File of `---`-separated passages used instead of a live generator.
    #[arg(long, global = true)]
    pub stub_generator: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample responses per topic and derive length variants.
    Generate {
        /// Topics JSONL, overriding `paths.topics`.
        #[arg(long)]
        topics: Option<PathBuf>,
        /// Stop after this many topics with new work (the rest resume later).
        #[arg(long)]
        max_topics: Option<usize>,
    },
    /// Embed every response into the cache.
    Embed {
        /// Exported hidden states (HSV1), one matrix per response in file order.
        #[arg(long)]
        hidden_states: Option<PathBuf>,
    },
    /// Compute per-topic isotropy measures into the observations CSV.
    Score,
    /// Score factuality of every response with the oracle.
    SegmentScore {
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Bootstrap R² per measure and write the report and bar chart.
    Evaluate {
        /// Observations CSV, overriding `<reports>/observations.csv`.
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Length variant to evaluate; defaults to the generator word target.
        #[arg(long)]
        length: Option<usize>,
    },
    /// R² as a function of sample count or response length.
    Sweep {
        /// Sample counts, e.g. `2..10` or `2,4,8`.
        #[arg(long)]
        n_values: Option<String>,
        /// Length variants, e.g. `125,250,500`.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
    },
    /// Summarize the reports directory as Markdown.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Embed { .. } => "embed",
            Command::Score => "score",
            Command::SegmentScore { .. } => "segment-score",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Report => "report",
        }
    }
}

/// A unit of work that failed permanently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub scope: String,
    pub error: String,
}

/// What a command did. Hard failures make the process exit nonzero.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub summary: Value,
    pub failures: Vec<Failure>,
}

pub(crate) struct Ctx {
    pub cfg: RunConfig,
    pub global: GlobalArgs,
    pub exec: Exec,
}

impl Ctx {
    pub fn n_boot(&self) -> usize {
        self.global.n_boot.unwrap_or(self.cfg.eval.n_boot)
    }

    pub fn seed(&self) -> u64 {
        self.global.seed.unwrap_or(self.cfg.eval.seed)
    }

    pub fn measure_names(&self) -> Vec<String> {
        self.global.measures.clone().unwrap_or_else(|| self.cfg.measures.clone())
    }
}

fn exec_for(workers: Option<usize>) -> Result<Exec> {
    match workers {
        Some(0) => anyhow::bail!("--workers must be at least 1"),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
        None => Ok(Exec::default()),
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let cfg = RunConfig::load(&cli.global.config)?;
    let exec = exec_for(cli.global.workers)?;
    let ctx = Ctx {
        cfg,
        global: cli.global,
        exec,
    };
    let name = cli.command.name();
    let (summary, failures) = match cli.command {
        Command::Generate { topics, max_topics } => commands::generate::run(&ctx, topics, max_topics)?,
        Command::Embed { hidden_states } => commands::embed::run(&ctx, hidden_states)?,
        Command::Score => commands::score::run(&ctx)?,
        Command::SegmentScore { topics } => commands::segment::run(&ctx, topics)?,
        Command::Evaluate { observations, length } => commands::evaluate::run(&ctx, observations, length)?,
        Command::Sweep { n_values, lengths } => commands::sweep::run(&ctx, n_values, lengths)?,
        Command::Report => commands::report::run(&ctx)?,
    };
    Ok(Outcome {
        command: name,
        summary,
        failures,
    })
}
