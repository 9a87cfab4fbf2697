use std::path::PathBuf;

use linnaeus_core::corpus::load_corpus;
use linnaeus_core::llm::write_finetune;
use linnaeus_core::pipeline::{save_model, train_pipeline, TrainConfig};

use super::{ensure_out_dir, load_taxonomy, read_merged_file};
use crate::backend::{backend_config, make_backend};
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::BackendArgs;

pub struct TrainArgs {
    pub taxonomy: String,
    pub corpus: PathBuf,
    pub merged: PathBuf,
    pub backend: BackendArgs,
    pub seed: u64,
    pub folds: usize,
    pub finetune_fraction: f64,
    pub grid_c: Vec<f64>,
    pub grid_gamma: Vec<f64>,
    pub threshold: f64,
    pub few_shot: usize,
    pub out: PathBuf,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    if !(args.finetune_fraction > 0.0 && args.finetune_fraction < 1.0) {
        return Err(CliError::Data("--finetune-fraction must be in (0, 1)".into()));
    }
    if args.folds < 2 {
        return Err(CliError::Data("--folds must be at least 2".into()));
    }
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let corpus = load_corpus(&args.corpus, &taxonomy)?;
    let merged = read_merged_file(&args.merged)?;
    let backend = make_backend(&args.backend, &taxonomy)?;
    ensure_out_dir(&args.out)?;

    let defaults = TrainConfig::default();
    let config = TrainConfig {
        seed: args.seed,
        folds: args.folds,
        finetune_fraction: args.finetune_fraction,
        grid_c: if args.grid_c.is_empty() { defaults.grid_c.clone() } else { args.grid_c.clone() },
        grid_gamma: args.grid_gamma.clone(),
        threshold: args.threshold,
        few_shot: args.few_shot,
        backend: backend_config(&args.backend),
        ..defaults
    };

    let output = train_pipeline(&corpus, &merged, &taxonomy, backend.as_ref(), &config)?;

    let model_path = args.out.join("model.json");
    save_model(&output.model, &model_path)?;
    let report_path = args.out.join("train-report.json");
    let mut report_text = serde_json::to_string_pretty(&output.report)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    report_text.push('\n');
    std::fs::write(&report_path, report_text)?;

    let mut manifest = Manifest::new("train");
    manifest
        .arg("taxonomy", &args.taxonomy)
        .arg("seed", args.seed)
        .arg("folds", args.folds)
        .arg("finetune_fraction", args.finetune_fraction)
        .arg("threshold", args.threshold)
        .arg("few_shot", args.few_shot)
        .arg("mock", args.backend.mock)
        .arg("model", &config.backend.model)
        .arg("artifact_schema", linnaeus_core::pipeline::ARTIFACT_SCHEMA_VERSION);
    manifest.input(&args.corpus)?;
    manifest.input(&args.merged)?;

    for (level, examples) in &output.finetune_exports {
        let path = args.out.join(format!("finetune-{level}.jsonl"));
        let mut file = std::fs::File::create(&path)?;
        write_finetune(examples, &mut file)?;
        manifest.output(&path)?;
    }
    manifest.output(&model_path)?;
    manifest.output(&report_path)?;
    manifest.write(&args.out)?;

    println!(
        "trained on {} rows ({} fine-tune / {} eval); selected {}; mean held-out macro F({}) = {:.4}",
        output.report.corpus_rows,
        output.report.finetune_rows,
        output.report.eval_rows,
        output.report.selection.candidates[output.report.selection.best_index].candidate,
        config.beta,
        output.report.mean_macro_f_beta,
    );
    println!("model written to {}", model_path.display());
    Ok(())
}
