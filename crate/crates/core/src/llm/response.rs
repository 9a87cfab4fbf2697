//! The fixed response schema: a JSON array of
//! `{"asn": int, "labels": [{"label": string, "confidence": number}], "rationale": string}`.
//!
//! This grammar is shared by the live backend, the mock backend and the
//! fine-tune completion format, so one parser covers them all.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmPrediction};
use crate::taxonomy::{TagId, TagSet};

#[derive(Debug, Serialize, Deserialize)]
struct WireLabel {
    label: String,
    confidence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireItem {
    asn: u32,
    labels: Vec<WireLabel>,
    rationale: String,
}

/// Serializes tag sets in the response schema with confidence 1.0 throughout.
pub fn render_predictions(items: &[(u32, &TagSet)], rationale: &str) -> String {
    let wire: Vec<WireItem> = items
        .iter()
        .map(|(asn, tags)| WireItem {
            asn: *asn,
            labels: tags
                .iter()
                .map(|t| WireLabel { label: t.to_string(), confidence: 1.0 })
                .collect(),
            rationale: rationale.to_string(),
        })
        .collect();
    serde_json::to_string(&wire).expect("wire items serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    /// One prediction per expected asn, in the expected order.
    pub predictions: Vec<LlmPrediction>,
    /// Labels outside the admissible set, dropped with a warning count.
    pub dropped_labels: usize,
}

/// Parses and validates a response document. Inadmissible labels are dropped
/// (counted), while structural problems, unknown/missing/duplicate asns and
/// out-of-range confidences are errors.
pub fn parse_response(
    text: &str,
    expected_asns: &[u32],
    admissible: &TagSet,
) -> Result<ParsedResponse, LlmError> {
    let wire: Vec<WireItem> =
        serde_json::from_str(text.trim()).map_err(|e| LlmError::Malformed(e.to_string()))?;

    let mut by_asn: BTreeMap<u32, LlmPrediction> = BTreeMap::new();
    let mut dropped = 0usize;
    for item in wire {
        if !expected_asns.contains(&item.asn) {
            return Err(LlmError::UnexpectedAsn(item.asn));
        }
        let mut confidences = BTreeMap::new();
        for label in item.labels {
            if !(0.0..=1.0).contains(&label.confidence) {
                return Err(LlmError::ConfidenceOutOfRange {
                    asn: item.asn,
                    label: label.label,
                    value: label.confidence,
                });
            }
            match TagId::new(label.label.as_str()) {
                Ok(tag) if admissible.contains(&tag) => {
                    confidences.insert(tag, label.confidence);
                }
                _ => dropped += 1,
            }
        }
        let prediction =
            LlmPrediction { asn: item.asn, confidences, rationale: item.rationale };
        if by_asn.insert(item.asn, prediction).is_some() {
            return Err(LlmError::DuplicateAsn(item.asn));
        }
    }

    let mut predictions = Vec::with_capacity(expected_asns.len());
    for &asn in expected_asns {
        match by_asn.remove(&asn) {
            Some(p) => predictions.push(p),
            None => return Err(LlmError::MissingAsn(asn)),
        }
    }
    Ok(ParsedResponse { predictions, dropped_labels: dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::builtin;

    fn tag(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    fn all_tags() -> TagSet {
        let tax = builtin::default_taxonomy();
        tax.nodes().iter().map(|n| n.id.clone()).collect()
    }

    #[test]
    fn parse_echoes_valid_input() {
        let text = r#"[{"asn":64500,"labels":[{"label":"government","confidence":0.92}],"rationale":"natl ministry"}]"#;
        let parsed = parse_response(text, &[64500], &all_tags()).unwrap();
        assert_eq!(parsed.predictions.len(), 1);
        let p = &parsed.predictions[0];
        assert_eq!(p.confidences.get(&tag("government")), Some(&0.92));
        assert_eq!(p.rationale, "natl ministry");
        assert_eq!(parsed.dropped_labels, 0);
    }

    #[test]
    fn inadmissible_label_is_dropped_with_warning() {
        let text = r#"[{"asn":64500,"labels":[{"label":"spaceship","confidence":0.9}],"rationale":"?"}]"#;
        let parsed = parse_response(text, &[64500], &all_tags()).unwrap();
        assert!(parsed.predictions[0].confidences.is_empty());
        assert_eq!(parsed.dropped_labels, 1);
    }

    #[test]
    fn truncated_document_is_malformed() {
        let text = r#"[{"asn":64500,"labels":[{"label":"government","conf"#;
        assert!(matches!(
            parse_response(text, &[64500], &all_tags()),
            Err(LlmError::Malformed(_))
        ));
    }

    #[test]
    fn missing_and_unexpected_asns_are_errors() {
        let text = r#"[{"asn":64500,"labels":[],"rationale":""}]"#;
        assert!(matches!(
            parse_response(text, &[64500, 64501], &all_tags()),
            Err(LlmError::MissingAsn(64501))
        ));
        assert!(matches!(
            parse_response(text, &[64999], &all_tags()),
            Err(LlmError::UnexpectedAsn(64500))
        ));
    }

    #[test]
    fn duplicate_asn_is_an_error() {
        let text = r#"[{"asn":1,"labels":[],"rationale":""},{"asn":1,"labels":[],"rationale":""}]"#;
        assert!(matches!(parse_response(text, &[1], &all_tags()), Err(LlmError::DuplicateAsn(1))));
    }

    #[test]
    fn out_of_range_confidence_is_an_error() {
        let text = r#"[{"asn":1,"labels":[{"label":"government","confidence":1.2}],"rationale":""}]"#;
        assert!(matches!(
            parse_response(text, &[1], &all_tags()),
            Err(LlmError::ConfidenceOutOfRange { .. })
        ));
    }

    #[test]
    fn render_then_parse_recovers_the_tag_set() {
        let set: TagSet =
            [tag("government"), tag("government.executive"), tag("government.national")]
                .into_iter()
                .collect();
        let text = render_predictions(&[(64500, &set)], "gold");
        let parsed = parse_response(&text, &[64500], &all_tags()).unwrap();
        let recovered: TagSet =
            parsed.predictions[0].confidences.keys().cloned().collect();
        assert_eq!(recovered, set);
        assert!(parsed.predictions[0].confidences.values().all(|&c| c == 1.0));
    }

    /// Round-trip over randomly drawn valid tag sets.
    #[test]
    fn random_tagsets_round_trip() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let tax = builtin::default_taxonomy();
        let tops = tax.top_tags();
        for _ in 0..500 {
            let mut set = TagSet::new();
            for top in &tops {
                if rng.random_bool(0.2) {
                    set.insert(top.clone());
                    let subs = tax.subtags_of(top).unwrap();
                    let mut used_groups = std::collections::BTreeSet::new();
                    for sub in subs {
                        if rng.random_bool(0.4) {
                            let group = tax.node(sub).unwrap().exclusivity_group.clone();
                            if let Some(g) = group {
                                if !used_groups.insert(g) {
                                    continue;
                                }
                            }
                            set.insert(sub.clone());
                        }
                    }
                }
            }
            assert!(tax.validate_tagset(&set).unwrap().is_empty());
            let text = render_predictions(&[(1, &set)], "rt");
            let parsed = parse_response(&text, &[1], &all_tags()).unwrap();
            let recovered: TagSet =
                parsed.predictions[0].confidences.keys().cloned().collect();
            assert_eq!(recovered, set);
        }
    }
}
