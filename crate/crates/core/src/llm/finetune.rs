//! Vendor-neutral fine-tune corpus export: one prompt/completion pair per
//! annotated AS at a given level, as line-delimited JSON. Submitting the
//! resulting file to a hosted training job is outside this crate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, PromptLevel};
use super::response::{parse_response, render_predictions};
use super::LlmError;
use crate::features::SemanticContext;
use crate::taxonomy::{Level, TagSet, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneExample {
    pub prompt: String,
    pub completion: String,
}

/// Builds the fine-tune stream for one level. At the top level every example
/// is exported with its top tags (possibly none); at `Sub(category)` only
/// examples carrying that category are exported, with their sub tags under it.
/// Every completion round-trips through the response parser back to the gold
/// labels at confidence 1.0.
pub fn export_finetune_corpus(
    examples: &[(SemanticContext, TagSet)],
    level: &PromptLevel,
    taxonomy: &Taxonomy,
) -> Result<Vec<FineTuneExample>, LlmError> {
    let admissible: TagSet = level.admissible(taxonomy)?.into_iter().map(|(t, _)| t).collect();

    let mut out = Vec::new();
    for (context, gold) in examples {
        let violations = taxonomy.validate_tagset(gold).map_err(|e| LlmError::InvalidGold {
            asn: context.asn,
            reason: e.to_string(),
        })?;
        if !violations.is_empty() {
            return Err(LlmError::InvalidGold {
                asn: context.asn,
                reason: violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        let projected: TagSet = match level {
            PromptLevel::Top => gold.at_level(taxonomy, Level::Top),
            PromptLevel::Sub(category) => {
                if !gold.contains(category) {
                    continue;
                }
                gold.iter()
                    .filter(|t| t.qualified_parent().as_ref() == Some(category))
                    .cloned()
                    .collect()
            }
        };
        debug_assert!(projected.is_subset(&admissible) || projected.is_empty());

        let prompt = build_prompt(level, taxonomy, &[], std::slice::from_ref(context))?;
        let completion = render_predictions(&[(context.asn, &projected)], "gold");
        debug_assert!(
            parse_response(&completion, &[context.asn], &admissible)
                .map(|p| {
                    p.predictions[0].confidences.keys().cloned().collect::<TagSet>() == projected
                })
                .unwrap_or(false),
            "completion must round-trip"
        );
        out.push(FineTuneExample { prompt: prompt.rendered, completion });
    }
    Ok(out)
}

/// Line-delimited JSON writer for the export.
pub fn write_finetune(examples: &[FineTuneExample], mut w: impl Write) -> Result<(), LlmError> {
    for example in examples {
        serde_json::to_writer(&mut w, example).map_err(|e| LlmError::Malformed(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}
