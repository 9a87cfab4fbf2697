//! `linnaeus`: batch AS classification runs from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 backend error, 5 internal.

mod backend;
mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "linnaeus", version, about = "Hierarchical multi-label AS classification")]
struct Cli {
    /// Worker threads for parallel sections (default: logical CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TaxonomyArg {
    /// Schema file path, or a builtin name (linnaeus-v1, naicslite-v1, isic-v1).
    #[arg(long, default_value = "linnaeus-v1")]
    taxonomy: String,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Use the deterministic keyword mock backend (fully offline).
    #[arg(long)]
    mock: bool,
    /// Keyword table for the mock backend (JSON map of keyword to tag id);
    /// defaults to the taxonomy-derived table.
    #[arg(long)]
    mock_table: Option<PathBuf>,
    /// Chat-completions endpoint URL (required unless --mock).
    #[arg(long, default_value = "")]
    endpoint: String,
    /// Model identifier sent to the backend.
    #[arg(id = "llm_model", long = "llm-model", default_value = "")]
    model: String,
    /// Maximum in-flight requests.
    #[arg(long, default_value_t = 4)]
    max_parallel: usize,
    /// HTTP retry budget.
    #[arg(long, default_value_t = 2)]
    retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the source snapshots, fuse them and write the merged dataset
    /// plus a coverage report.
    Ingest {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        /// AS-Rank export (line-delimited JSON). Defines the ASN universe.
        #[arg(long)]
        asrank: PathBuf,
        /// PeeringDB public dump (single JSON document).
        #[arg(long)]
        peeringdb: Option<PathBuf>,
        /// IPinfo ASN CSV.
        #[arg(long)]
        ipinfo: Option<PathBuf>,
        /// Eyeball-population CSV.
        #[arg(long)]
        eyeball: Option<PathBuf>,
        /// RDAP base URL; gaps are fetched lazily when set.
        #[arg(long)]
        rdap_endpoint: Option<String>,
        /// On-disk RDAP cache directory.
        #[arg(long)]
        rdap_cache: Option<PathBuf>,
        /// Parallel RDAP fetches while warming the cache.
        #[arg(long, default_value_t = 4)]
        rdap_parallel: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the pipeline on an annotated corpus and write the model
    /// artifact, CV report and fine-tune exports.
    Train {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long)]
        corpus: PathBuf,
        /// Merged dataset from `ingest`.
        #[arg(long)]
        merged: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        /// Fine-tune slice fraction (rest trains the structured model).
        #[arg(long, default_value_t = 0.7)]
        finetune_fraction: f64,
        /// C grid for the nested search.
        #[arg(long, value_delimiter = ',')]
        grid_c: Vec<f64>,
        /// Gamma grid; empty selects the default including 1/dimension.
        #[arg(long, value_delimiter = ',')]
        grid_gamma: Vec<f64>,
        /// Decision threshold on calibrated probabilities.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Few-shot exemplars per prompt level.
        #[arg(long, default_value_t = 3)]
        few_shot: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a merged dataset with a trained model, resumable via
    /// checkpoints.
    Classify {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        merged: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Records per checkpoint.
        #[arg(long, default_value_t = 1000)]
        checkpoint_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction file against a gold corpus.
    Evaluate {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long)]
        predictions: PathBuf,
        /// Gold corpus (CSV or JSON).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export fine-tune prompt/completion files from an annotated corpus.
    ExportFinetune {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        merged: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-category annotation counts of a corpus.
    Stats {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long)]
        corpus: PathBuf,
        /// Also write stats.json/stats.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic corpus, merged dataset and mock
    /// keyword table for offline runs.
    Synth {
        #[command(flatten)]
        taxonomy: TaxonomyArg,
        #[arg(long, default_value_t = 30)]
        per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest {
            taxonomy,
            asrank,
            peeringdb,
            ipinfo,
            eyeball,
            rdap_endpoint,
            rdap_cache,
            rdap_parallel,
            out,
        } => commands::ingest::run(commands::ingest::IngestArgs {
            taxonomy: taxonomy.taxonomy,
            asrank,
            peeringdb,
            ipinfo,
            eyeball,
            rdap_endpoint,
            rdap_cache,
            rdap_parallel,
            out,
        }),
        Command::Train {
            taxonomy,
            corpus,
            merged,
            backend,
            seed,
            folds,
            finetune_fraction,
            grid_c,
            grid_gamma,
            threshold,
            few_shot,
            out,
        } => commands::train::run(commands::train::TrainArgs {
            taxonomy: taxonomy.taxonomy,
            corpus,
            merged,
            backend,
            seed,
            folds,
            finetune_fraction,
            grid_c,
            grid_gamma,
            threshold,
            few_shot,
            out,
        }),
        Command::Classify { taxonomy, model, merged, backend, resume, checkpoint_every, out } => {
            commands::classify::run(commands::classify::ClassifyArgs {
                taxonomy: taxonomy.taxonomy,
                model,
                merged,
                backend,
                resume,
                checkpoint_every,
                out,
            })
        }
        Command::Evaluate { taxonomy, predictions, truth, out } => {
            commands::evaluate::run(&taxonomy.taxonomy, &predictions, &truth, &out)
        }
        Command::ExportFinetune { taxonomy, corpus, merged, out } => {
            commands::export_finetune::run(&taxonomy.taxonomy, &corpus, &merged, &out)
        }
        Command::Stats { taxonomy, corpus, out } => {
            commands::stats::run(&taxonomy.taxonomy, &corpus, out.as_deref())
        }
        Command::Synth { taxonomy, per_category, seed, out } => {
            commands::synth::run(&taxonomy.taxonomy, per_category, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.code())
        }
    }
}
