use std::collections::BTreeMap;
use std::path::Path;

use linnaeus_core::corpus::load_corpus;
use linnaeus_core::eval::compute_metrics;
use linnaeus_core::pipeline::classify::read_predictions;
use linnaeus_core::taxonomy::Level;

use super::{ensure_out_dir, load_taxonomy};
use crate::error::CliError;
use crate::manifest::Manifest;

pub fn run(taxonomy_spec: &str, predictions: &Path, truth: &Path, out: &Path) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(taxonomy_spec)?;
    let corpus = load_corpus(truth, &taxonomy)?;
    let file = std::fs::File::open(predictions).map_err(|e| CliError::data("--predictions", e))?;
    let predicted = read_predictions(std::io::BufReader::new(file))?;
    ensure_out_dir(out)?;

    let by_asn: BTreeMap<u32, &linnaeus_core::pipeline::HierarchicalPrediction> =
        predicted.iter().map(|p| (p.asn, p)).collect();

    let mut top_pred = Vec::new();
    let mut top_truth = Vec::new();
    let mut sub_pred = Vec::new();
    let mut sub_truth = Vec::new();
    for row in &corpus.rows {
        let Some(p) = by_asn.get(&row.asn) else {
            return Err(CliError::Data(format!(
                "prediction file has no entry for corpus asn {}",
                row.asn
            )));
        };
        top_pred.push(p.top_tags.clone());
        top_truth.push(row.tags.at_level(&taxonomy, Level::Top));
        sub_pred.push(p.sub_tags.clone());
        sub_truth.push(row.tags.at_level(&taxonomy, Level::Sub));
    }

    let top_report = compute_metrics(&top_pred, &top_truth, &taxonomy.top_tags())?;
    let sub_tags = taxonomy.sub_tags();
    let sub_report = if sub_tags.is_empty() {
        None
    } else {
        Some(compute_metrics(&sub_pred, &sub_truth, &sub_tags)?)
    };

    println!("top-level metrics");
    print!("{}", top_report.render_text());
    if let Some(report) = &sub_report {
        println!("\nsub-level metrics");
        print!("{}", report.render_text());
    }

    let json = serde_json::json!({
        "top": top_report,
        "sub": sub_report,
    });
    let metrics_path = out.join("metrics.json");
    let mut text =
        serde_json::to_string_pretty(&json).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(&metrics_path, text)?;

    let mut table = top_report.render_text();
    if let Some(report) = &sub_report {
        table.push('\n');
        table.push_str(&report.render_text());
    }
    let table_path = out.join("metrics.txt");
    std::fs::write(&table_path, table)?;

    let mut manifest = Manifest::new("evaluate");
    manifest.arg("taxonomy", taxonomy_spec);
    manifest.input(predictions)?;
    manifest.input(truth)?;
    manifest.output(&metrics_path)?;
    manifest.output(&table_path)?;
    manifest.write(out)?;
    Ok(())
}
