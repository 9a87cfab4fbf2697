//! Prompt batching and deterministic prompt rendering.

use serde::{Deserialize, Serialize};

use super::response::render_predictions;
use super::LlmError;
use crate::features::SemanticContext;
use crate::taxonomy::{TagId, TagSet, Taxonomy};

/// Mini-batch size cap per request.
pub const MAX_BATCH: usize = 10;

/// Which classifier a prompt serves: the top level, or one category's
/// sub-level gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptLevel {
    Top,
    Sub(TagId),
}

impl PromptLevel {
    /// The admissible (tag, description) pairs at this level, in schema order.
    pub fn admissible(&self, taxonomy: &Taxonomy) -> Result<Vec<(TagId, String)>, LlmError> {
        let tags = match self {
            PromptLevel::Top => taxonomy.top_tags(),
            PromptLevel::Sub(category) => taxonomy.subtags_of(category)?.to_vec(),
        };
        Ok(tags
            .into_iter()
            .map(|tag| {
                let description =
                    taxonomy.node(&tag).map(|n| n.description.clone()).unwrap_or_default();
                (tag, description)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBatch {
    pub level: PromptLevel,
    pub admissible: Vec<(TagId, String)>,
    pub few_shot: Vec<(SemanticContext, TagSet)>,
    pub items: Vec<SemanticContext>,
    pub rendered: String,
}

/// Splits contexts into groups of at most `max_batch`, preserving order.
pub fn batch_contexts(contexts: &[SemanticContext], max_batch: usize) -> Vec<Vec<SemanticContext>> {
    assert!(max_batch >= 1, "max_batch must be at least 1");
    contexts.chunks(max_batch).map(<[SemanticContext]>::to_vec).collect()
}

fn field(out: &mut String, name: &str, value: Option<&str>) {
    match value {
        Some(v) => out.push_str(&format!(" {name}={v:?}")),
        None => out.push_str(&format!(" {name}=absent")),
    }
}

/// One item line with a stable field order.
pub(crate) fn render_item(index: usize, context: &SemanticContext) -> String {
    let mut line = format!("{index}. asn={}", context.asn);
    field(&mut line, "as_name", context.as_name.as_deref());
    field(&mut line, "org_name", context.org_name.as_deref());
    field(&mut line, "as_country", context.as_country.as_deref());
    field(&mut line, "org_country", context.org_country.as_deref());
    field(&mut line, "website", context.website.as_deref());
    line
}

pub(crate) const RESPONSE_DIRECTIVE: &str = r#"Respond with only a JSON array, one object per input item, following exactly: [{"asn": <integer>, "labels": [{"label": "<one of the valid labels>", "confidence": <number between 0 and 1>}], "rationale": "<short explanation>"}]"#;

/// Builds a prompt whose rendered text contains, in order: the instruction
/// block, the admissible label list, few-shot exemplars, the numbered items,
/// and the response-schema directive. Identical inputs render identically.
pub fn build_prompt(
    level: &PromptLevel,
    taxonomy: &Taxonomy,
    few_shot: &[(SemanticContext, TagSet)],
    items: &[SemanticContext],
) -> Result<PromptBatch, LlmError> {
    if items.is_empty() || items.len() > MAX_BATCH {
        return Err(LlmError::BadBatchSize(items.len()));
    }
    let admissible = level.admissible(taxonomy)?;
    for (_, tags) in few_shot {
        for tag in tags.iter() {
            if !admissible.iter().any(|(t, _)| t == tag) {
                return Err(LlmError::InadmissibleFewShot(tag.clone()));
            }
        }
    }

    let mut text = String::new();
    match level {
        PromptLevel::Top => text.push_str(
            "Assign zero or more of the valid labels to each autonomous system below, \
             judging from its names, countries and website.\n",
        ),
        PromptLevel::Sub(category) => text.push_str(&format!(
            "Each autonomous system below is already known to belong to the {category} \
             category. Assign zero or more of the valid sub-labels, judging from its \
             names, countries and website.\n",
        )),
    }
    text.push_str("\nValid labels:\n");
    for (tag, description) in &admissible {
        if description.is_empty() {
            text.push_str(&format!("- {tag}\n"));
        } else {
            text.push_str(&format!("- {tag}: {description}\n"));
        }
    }
    if !few_shot.is_empty() {
        text.push_str("\nExamples:\n");
        for (context, tags) in few_shot {
            text.push_str("Input:\n");
            text.push_str(&render_item(1, context));
            text.push_str("\nOutput:\n");
            text.push_str(&render_predictions(&[(context.asn, tags)], "example"));
            text.push('\n');
        }
    }
    text.push_str("\nClassify the following:\n");
    for (i, context) in items.iter().enumerate() {
        text.push_str(&render_item(i + 1, context));
        text.push('\n');
    }
    text.push('\n');
    text.push_str(RESPONSE_DIRECTIVE);
    text.push('\n');

    Ok(PromptBatch {
        level: level.clone(),
        admissible,
        few_shot: few_shot.to_vec(),
        items: items.to_vec(),
        rendered: text,
    })
}
