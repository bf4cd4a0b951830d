//! The `tokcurr` command line: argument parsing, configuration resolution,
//! run directories and the subcommands.
//!
//! Every command except `tune-length` creates its own run directory under
//! `--out-dir` (default `runs`) named `<UTC timestamp>-<config hash>` and
//! writes `manifest.json` there before doing any work.

mod commands;
mod config;
mod run_dir;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use commands::{
    build_data, cmd_analyze_diversity, cmd_analyze_errors, cmd_evaluate, cmd_schedule_dump, cmd_train, cmd_tune_length, diversity_rows,
    error_tables, evenly_spaced_steps, model_config, read_metric_history, ErrorRow, Split, TaskData,
};
pub use config::{DecodeConfig, ModelSection, RunConfig, TaskConfig, TaskKind, SYNTH_SCALE};
pub use run_dir::{create_run_dir, RunManifest, MANIFEST_VERSION};

use crate::curriculum::{MetricDirection, Variant};
use crate::error::Result;
use crate::train::DevMetric;

#[derive(Debug, Parser)]
#[command(name = "tokcurr", version, about = "Token-wise curriculum learning for small sequence-to-sequence models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes checkpoints, train_log.csv and the manifest.
    Train(CommonArgs),
    /// Score a checkpoint with BLEU, token accuracy or perplexity.
    Evaluate(EvaluateArgs),
    /// Write the (step, position) weight grid of a curriculum.
    ScheduleDump(ScheduleArgs),
    /// Cumulative unique trigrams consumed by two or more curricula.
    AnalyzeDiversity(DiversityArgs),
    /// Error rate by relative target position for a checkpoint.
    AnalyzeErrors(ErrorsArgs),
    /// Curriculum length from a baseline training log.
    TuneLength(TuneArgs),
}

/// Configuration flags shared by the commands. Each one overrides the
/// matching config-file entry.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with [task], [model], [train], [curriculum] and [decode] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parent directory of run directories.
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub task: Option<TaskKind>,
    #[arg(long, value_parser = parse_variant)]
    pub curriculum: Option<Variant>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub curriculum_steps: Option<usize>,
    #[arg(long)]
    pub sc_baby_steps: Option<usize>,
    #[arg(long)]
    pub sc_c0: Option<f64>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub length_penalty: Option<f64>,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
}

impl CommonArgs {
    /// Dotted config paths set on the command line.
    pub fn overrides(&self) -> Vec<(String, Value)> {
        let mut o = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("task.kind", self.task.map(|t| serde_json::to_value(t).expect("enum")));
        put("curriculum.variant", self.curriculum.map(|v| json!(v.as_str())));
        put("curriculum.lambda0", self.lambda0.map(|v| json!(v)));
        put("curriculum.gamma0", self.gamma0.map(|v| json!(v)));
        put("curriculum.alpha0", self.alpha0.map(|v| json!(v)));
        put("curriculum.steps", self.curriculum_steps.map(|v| json!(v)));
        put("curriculum.sc_baby_steps", self.sc_baby_steps.map(|v| json!(v)));
        put("curriculum.sc_c0", self.sc_c0.map(|v| json!(v)));
        put("decode.beam", self.beam.map(|v| json!(v)));
        put("decode.length_penalty", self.length_penalty.map(|v| json!(v)));
        put("task.subsample", self.subsample.map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("train.max_steps", self.max_steps.map(|v| json!(v)));
        put("train.eval_interval", self.eval_interval.map(|v| json!(v)));
        o
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Accuracy,
    Perplexity,
}

impl From<MetricArg> for DevMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Bleu => DevMetric::Bleu,
            MetricArg::Accuracy => DevMetric::Accuracy,
            MetricArg::Perplexity => DevMetric::Perplexity,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to perplexity for language-model tasks and BLEU otherwise.
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_enum, default_value = "dev")]
    pub split: Split,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target lengths to tabulate.
    #[arg(long = "len", value_delimiter = ',', default_value = "10")]
    pub lens: Vec<usize>,
    /// Explicit update indices; overrides --points.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<usize>>,
    /// Number of evenly spaced indices from 0 to the curriculum length.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct DiversityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Curricula to compare, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant, required = true)]
    pub methods: Vec<Variant>,
    /// Horizon as a fraction of the curriculum length.
    #[arg(long, default_value_t = 0.25)]
    pub horizon_fraction: f64,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub partitions: usize,
    /// Reference length filters: `all`, `a-b` or `a-`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub filters: Vec<String>,
    /// Fraction of each reference counted as its tail.
    #[arg(long, default_value_t = 0.25)]
    pub tail_fraction: f64,
    #[arg(long, value_enum, default_value = "dev")]
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Higher,
    Lower,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Training-log CSV of a baseline run.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "dev_metric")]
    pub metric_column: String,
    #[arg(long, default_value_t = 0.7)]
    pub fraction: f64,
    #[arg(long, value_enum, default_value = "higher")]
    pub direction: DirectionArg,
}

/// Runs one parsed command and returns what it prints on success.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(c) => cmd_train(&c.resolve()?, &c.out_dir),
        Command::Evaluate(a) => {
            let cfg = a.common.resolve()?;
            let metric = match a.metric {
                Some(m) => m.into(),
                None if cfg.task.kind == TaskKind::SynthLm => DevMetric::Perplexity,
                None => DevMetric::Bleu,
            };
            cmd_evaluate(&cfg, &a.common.out_dir, &a.checkpoint, metric, a.split)
        }
        Command::ScheduleDump(a) => {
            let cfg = a.common.resolve()?;
            let steps = a.at.clone().unwrap_or_else(|| evenly_spaced_steps(cfg.curriculum.steps, a.points));
            cmd_schedule_dump(&cfg, &a.common.out_dir, &a.lens, &steps)
        }
        Command::AnalyzeDiversity(a) => cmd_analyze_diversity(&a.common.resolve()?, &a.common.out_dir, &a.methods, a.horizon_fraction),
        Command::AnalyzeErrors(a) => cmd_analyze_errors(
            &a.common.resolve()?,
            &a.common.out_dir,
            &a.checkpoint,
            a.split,
            a.partitions,
            &a.filters,
            a.tail_fraction,
        ),
        Command::TuneLength(a) => {
            let direction = match a.direction {
                DirectionArg::Higher => MetricDirection::Higher,
                DirectionArg::Lower => MetricDirection::Lower,
            };
            cmd_tune_length(&a.log, &a.metric_column, a.fraction, direction)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| crate::Error::invalid(e.to_string()))?;
    execute(cli)
}

/// Process entry point: prints the command output, or the error on stderr
/// with exit status 1. Usage errors exit with status 2.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
