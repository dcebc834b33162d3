//! Command-line pipeline: dataset generation, rendering, evaluation,
//! probing, statistics, adapter geometry and reports.

pub mod config;
pub mod error;
pub mod output;
pub mod stages;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliResult;
use stages::StageOutcome;

#[derive(Debug, Parser)]
#[command(name = "mulprobe", version, about = "Multiplication benchmark and heuristic probe pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run config; defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `backend.parallelism`.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Overrides `backend.max_failure_rate`.
    #[arg(long, global = true)]
    pub max_failure_rate: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate the suite, HDS, traps, perturbation pairs and trace corpora.
    Gen,
    /// Render suite and probe items into their representations.
    Render,
    /// Greedy evaluation of the rendered suite, then `stats`.
    Eval,
    /// Forced-completion probes with the configured bank.
    Probe,
    /// Contrastive correct/incorrect step probes.
    Contrast,
    /// Style-shift ablation: both banks on the same items.
    Ablate,
    /// Accuracy, logistic and error-rate fits from evaluation records.
    Stats,
    /// Pairwise cosine similarity of adapter updates.
    Geometry {
        /// Adapter directories, added to `geometry.adapters`.
        dirs: Vec<PathBuf>,
    },
    /// Re-check every output hash.
    Verify {
        /// Also rebuild the dataset and compare its manifest hash.
        #[arg(long)]
        regenerate: bool,
    },
    /// Markdown report and JSON summary of whatever outputs exist.
    Report,
    /// Print the effective config and its hash.
    Config,
}

impl GlobalArgs {
    pub fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.parallelism {
            cfg.backend.parallelism = p;
        }
        if let Some(r) = self.max_failure_rate {
            cfg.backend.max_failure_rate = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one subcommand and applies the partial-failure threshold.
pub fn run(cfg: &RunConfig, command: &Command) -> CliResult<StageOutcome> {
    let out = match command {
        Command::Gen => stages::cmd_gen(cfg)?,
        Command::Render => stages::cmd_render(cfg)?,
        Command::Eval => stages::cmd_eval(cfg)?,
        Command::Probe => stages::cmd_probe(cfg)?,
        Command::Contrast => stages::cmd_contrast(cfg)?,
        Command::Ablate => stages::cmd_ablate(cfg)?,
        Command::Stats => stages::cmd_stats(cfg)?,
        Command::Geometry { dirs } => stages::cmd_geometry(cfg, dirs)?,
        Command::Verify { regenerate } => stages::cmd_verify(cfg, *regenerate)?,
        Command::Report => stages::cmd_report(cfg)?,
        Command::Config => {
            let mut out = StageOutcome::default();
            out.note(serde_json::to_string_pretty(cfg).expect("config serializes"));
            out.note(format!("config hash {}", cfg.hash()));
            out
        }
    };
    out.check(cfg.backend.max_failure_rate)?;
    Ok(out)
}
