//! `maskeval` — ingest, curate, prompt, and score censored-transcription
//! datasets from one reproducible command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O failure, 64 usage.

mod commands;
mod config;
mod redact;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{PipelineConfig, CONFIG_ENV_VAR};

/// Command-level failures, ordered by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad inputs, bad config, failed checks: exit 1.
    Validation(String),
    /// Filesystem or stream trouble: exit 2.
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<maskeval::Error> for CliError {
    fn from(e: maskeval::Error) -> Self {
        match e {
            maskeval::Error::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "maskeval",
    version,
    about = "Dataset curation and MAR/WER/UMWER scoring for masked hate-speech transcription"
)]
struct Cli {
    /// Config file (default: $MASKEVAL_CONFIG when set)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; every sampled artifact is a pure function of it
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory for written artifacts
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    /// Hash non-mask tokens in anything printed outside explicit output files
    #[arg(long, global = true)]
    redact: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CandidateInputs {
    /// Candidate records, line-delimited JSON
    #[arg(long, value_name = "FILE")]
    candidates: Option<PathBuf>,

    /// Verdict file joined by candidate id (for candidates without embedded verdicts)
    #[arg(long, value_name = "FILE")]
    verdicts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus, apply the symbol pre-filter, write clean records
    /// plus masked references for the unanimously hateful subset
    Ingest {
        /// Corpus records, line-delimited JSON
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Per-id keep/drop override list (+id / -id per line)
        #[arg(long, value_name = "FILE")]
        overrides: Option<PathBuf>,
        /// Annotator votes needed to mask a token (1..=3)
        #[arg(long, value_name = "N")]
        annotator_votes: Option<u8>,
        /// Skip the symbol pre-filter entirely
        #[arg(long)]
        keep_all: bool,
    },

    /// Extract frequent terms from hateful records and select the ones the
    /// classifier ensemble calls hateful
    Keywords {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Term-keyed verdict file
        #[arg(long, value_name = "FILE")]
        verdicts: Option<PathBuf>,
        /// Minimum corpus frequency for a term
        #[arg(long, value_name = "N")]
        min_count: Option<usize>,
        /// Hateful votes (of 5) needed to select a term
        #[arg(long, value_name = "N")]
        keyword_votes: Option<usize>,
        /// Replacement stop-list file (one term per line)
        #[arg(long, value_name = "FILE")]
        stoplist: Option<PathBuf>,
        /// Count terms over all records, not just the unanimously hateful
        #[arg(long)]
        all_records: bool,
    },

    /// Keep candidates at or above a hate level
    Filter {
        #[command(flatten)]
        inputs: CandidateInputs,
        /// Minimum hate level (0..=5)
        #[arg(long, value_name = "N")]
        min_level: Option<u8>,
    },

    /// Build masked references for candidates from per-token attribution scores
    Mask {
        #[command(flatten)]
        inputs: CandidateInputs,
        /// External attribution scores ({"id", "scores"} per line); overrides
        /// scores embedded in the candidates
        #[arg(long, value_name = "FILE")]
        attributions: Option<PathBuf>,
        /// Scores strictly above this are masked
        #[arg(long, value_name = "X")]
        threshold_attribution: Option<f64>,
    },

    /// Sample a training manifest for a named plan
    Curriculum {
        #[command(flatten)]
        inputs: CandidateInputs,
        /// Plan name (built-ins: curriculum-2, mixed-2, curriculum-3, mixed-3)
        #[arg(long, value_name = "NAME")]
        plan: String,
        /// JSON file of named plans replacing the built-ins
        #[arg(long, value_name = "FILE")]
        plans_file: Option<PathBuf>,
        /// Split multi-level stages evenly per level instead of pooling
        #[arg(long)]
        balance_levels: bool,
    },

    /// Print the instruction bank, pick per-sample prompts, or render the
    /// generation prompt for a keyword
    Prompts {
        /// Print the evaluation-time instruction and exit
        #[arg(long, conflicts_with_all = ["pick", "keyword"])]
        test_prompt: bool,
        /// Print the training prompt assigned to this sample index
        #[arg(long, value_name = "INDEX", conflicts_with = "keyword")]
        pick: Option<u64>,
        /// Render the generation prompt for this keyword
        #[arg(long, value_name = "WORD")]
        keyword: Option<String>,
        /// Target group shared by the two example sentences
        #[arg(long, value_name = "GROUP")]
        target: Option<String>,
        /// Corpus supplying the example sentences
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Replacement prompt bank (blank-line-separated entries)
        #[arg(long, value_name = "FILE")]
        bank_file: Option<PathBuf>,
        /// Write to this file instead of standard output
        #[arg(long, value_name = "FILE")]
        out_file: Option<PathBuf>,
    },

    /// Score hypotheses against masked references with MAR/WER/UMWER
    Score {
        /// Scoring input ({"id", "ref", "hyp"} per line)
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        /// micro (pool counts) or macro (average rates)
        #[arg(long, value_name = "MODE")]
        aggregation: Option<String>,
    },

    /// Run the finite-difference checks for both training objectives
    CheckGradients {
        /// Number of random problems
        #[arg(long, value_name = "N", default_value_t = 100)]
        seeds: u64,
        /// Central-difference step
        #[arg(long, value_name = "X", default_value_t = 1e-5)]
        eps: f64,
    },
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let config_path = cli.config.clone().or_else(|| {
        std::env::var(CONFIG_ENV_VAR)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(PathBuf::from)
    });
    let mut config = match &config_path {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };

    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(output) = &cli.output {
        config.output = output.clone();
    }
    config.redact = config.redact || cli.redact;

    // fold subcommand flags into the effective config (flags win)
    match &cli.command {
        Command::Ingest {
            corpus,
            overrides,
            annotator_votes,
            ..
        } => {
            if corpus.is_some() {
                config.corpus = corpus.clone();
            }
            if overrides.is_some() {
                config.overrides = overrides.clone();
            }
            if let Some(v) = annotator_votes {
                config.annotator_votes = *v;
            }
        }
        Command::Keywords {
            corpus,
            verdicts,
            min_count,
            keyword_votes,
            ..
        } => {
            if corpus.is_some() {
                config.corpus = corpus.clone();
            }
            if verdicts.is_some() {
                config.verdicts = verdicts.clone();
            }
            if let Some(v) = min_count {
                config.min_count = *v;
            }
            if let Some(v) = keyword_votes {
                config.keyword_votes = *v;
            }
        }
        Command::Filter { inputs, min_level } => {
            if inputs.candidates.is_some() {
                config.candidates = inputs.candidates.clone();
            }
            if inputs.verdicts.is_some() {
                config.verdicts = inputs.verdicts.clone();
            }
            if let Some(v) = min_level {
                config.min_level = *v;
            }
        }
        Command::Mask {
            inputs,
            attributions,
            threshold_attribution,
        } => {
            if inputs.candidates.is_some() {
                config.candidates = inputs.candidates.clone();
            }
            if inputs.verdicts.is_some() {
                config.verdicts = inputs.verdicts.clone();
            }
            if attributions.is_some() {
                config.attributions = attributions.clone();
            }
            if let Some(v) = threshold_attribution {
                config.attribution = *v;
            }
        }
        Command::Curriculum { inputs, .. } => {
            if inputs.candidates.is_some() {
                config.candidates = inputs.candidates.clone();
            }
            if inputs.verdicts.is_some() {
                config.verdicts = inputs.verdicts.clone();
            }
        }
        Command::Prompts { corpus, .. } => {
            if corpus.is_some() {
                config.corpus = corpus.clone();
            }
        }
        Command::Score { aggregation, .. } => {
            if let Some(s) = aggregation {
                config.aggregation = maskeval::metrics::Aggregation::parse(s)
                    .ok_or_else(|| CliError::Validation(format!("unknown aggregation {s:?}")))?;
            }
        }
        Command::CheckGradients { .. } => {}
    }

    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli)?;
    eprintln!("{}", config.provenance_line());

    match &cli.command {
        Command::Ingest { keep_all, .. } => commands::ingest(&config, *keep_all),
        Command::Keywords {
            stoplist,
            all_records,
            ..
        } => commands::keywords(&config, stoplist, *all_records),
        Command::Filter { .. } => commands::filter(&config),
        Command::Mask { .. } => commands::mask(&config),
        Command::Curriculum {
            plan,
            plans_file,
            balance_levels,
            ..
        } => commands::curriculum(&config, plan, plans_file, *balance_levels),
        Command::Prompts {
            test_prompt,
            pick,
            keyword,
            target,
            bank_file,
            out_file,
            ..
        } => commands::prompts(
            &config,
            &commands::PromptArgs {
                test_prompt: *test_prompt,
                pick: *pick,
                keyword: keyword.clone(),
                target: target.clone(),
                bank_file: bank_file.clone(),
                out_file: out_file.clone(),
            },
        ),
        Command::Score { pairs, .. } => commands::score(&config, pairs),
        Command::CheckGradients { seeds, eps } => commands::check_gradients(&config, *seeds, *eps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors; everything else is usage
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Validation(_) => ExitCode::from(1),
                CliError::Io(_) => ExitCode::from(2),
            }
        }
    }
}
