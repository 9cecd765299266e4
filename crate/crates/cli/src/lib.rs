//! `ragate`: staged experiments for uncertainty-gated retrieval.

pub mod config;
pub mod error;
pub mod stages;
pub mod toy;
pub mod workspace;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ragate", version, about = "Uncertainty-gated adaptive retrieval experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// `dotted.key=value` patches applied to the configuration.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the BM25 index, from a config or from `--corpus` and `--out`.
    Index {
        /// Experiment configuration (JSON).
        #[arg(long, conflicts_with_all = ["corpus", "out"])]
        config: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Corpus JSONL of `{"doc_id", "title", "body"}`.
        #[arg(long, requires = "out")]
        corpus: Option<PathBuf>,
        /// Where the serialized index goes.
        #[arg(long, requires = "corpus")]
        out: Option<PathBuf>,
    },
    /// Fill the generation cache for every question.
    Generate(ConfigArgs),
    /// Compute uncertainty scores and correctness labels.
    Score(ConfigArgs),
    /// Fit the retrieve/skip deciders.
    Fit(ConfigArgs),
    /// Run every strategy on the test splits, or one strategy directly.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Direct mode: questions to run.
        #[arg(long, requires = "strategy")]
        dataset: Option<PathBuf>,
        #[arg(long, value_parser = ["never", "always", "adaptive", "ideal"])]
        strategy: Option<String>,
        /// Method id the decider was fitted on.
        #[arg(long)]
        estimator: Option<String>,
        /// Fitted decider (`*.scorer.json` or a bare model file).
        #[arg(long)]
        decider: Option<PathBuf>,
        /// Where direct mode writes its JSONL; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute the metric tables.
    Eval(ConfigArgs),
    /// Cross-dataset transfer and significance tests.
    Ood(ConfigArgs),
    /// Rademacher complexity and sharpness of the decider families.
    Complexity(ConfigArgs),
    /// Render markdown tables and collect the CSVs.
    Report(ConfigArgs),
    /// Every stage in order.
    All(ConfigArgs),
    /// Write the bundled toy experiment into a directory.
    ToyFixture {
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Index { config, overrides, corpus, out } => match (config, corpus, out) {
            (Some(config), _, _) => stages::cmd_index(&ExperimentConfig::load(&config, &overrides)?),
            (None, Some(corpus), Some(out)) => {
                let docs = ragate_core::io::load_corpus(&corpus)?;
                let index = ragate_core::retrieval::Bm25Index::build(docs, Default::default())?;
                workspace::write_json(&out, &index)
            }
            _ => Err(CliError::Config("`index` needs --config or both --corpus and --out".into())),
        },
        Command::Generate(a) => stages::cmd_generate(&a.load()?),
        Command::Score(a) => stages::cmd_score(&a.load()?),
        Command::Fit(a) => stages::cmd_fit(&a.load()?),
        Command::Run { cfg, dataset, strategy, estimator, decider, output } => {
            let config = cfg.load()?;
            match (dataset, strategy) {
                (Some(dataset), Some(strategy)) => {
                    let strategy = strategy.parse()?;
                    let records =
                        stages::run_direct(&config, &dataset, strategy, estimator.as_deref(), decider.as_deref())?;
                    let bytes = ragate_core::io::to_jsonl_bytes(&records)?;
                    match output {
                        Some(path) => workspace::write_bytes(&path, &bytes),
                        None => {
                            use std::io::Write;
                            std::io::stdout().write_all(&bytes)?;
                            Ok(())
                        }
                    }
                }
                (None, None) => stages::cmd_run(&config),
                _ => Err(CliError::Config("direct runs need both --dataset and --strategy".into())),
            }
        }
        Command::Eval(a) => stages::cmd_eval(&a.load()?),
        Command::Ood(a) => stages::cmd_ood(&a.load()?),
        Command::Complexity(a) => stages::cmd_complexity(&a.load()?),
        Command::Report(a) => stages::cmd_report(&a.load()?),
        Command::All(a) => stages::cmd_all(&a.load()?),
        Command::ToyFixture { out } => toy::write_fixture(&out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
