//! Annotated gold-corpus I/O and per-class statistics.
//!
//! Two interchangeable file formats: a CSV with columns `asn, tags, note`
//! (tags semicolon-separated) behind a `# taxonomy=<name> version=<version>`
//! preamble line, and a JSON document carrying the same information. Unknown
//! CSV columns are ignored.

pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::LabeledExample;
use crate::taxonomy::{Level, TagId, TagSet, Taxonomy, TaxonomyError};

pub use synthetic::{generate_synthetic, MultiLabelRule, NumericProfile, SyntheticDataset, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub asn: u32,
    pub tags: TagSet,
    /// Annotator provenance, free text.
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedCorpus {
    pub taxonomy_name: String,
    pub taxonomy_version: String,
    pub rows: Vec<CorpusRow>,
}

impl AnnotatedCorpus {
    pub fn examples(&self) -> Vec<LabeledExample> {
        self.rows.iter().map(|r| LabeledExample { asn: r.asn, tags: r.tags.clone() }).collect()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(String),
    #[error("missing `# taxonomy=<name> version=<version>` preamble line")]
    MissingPreamble,
    #[error("corpus was annotated against {found_name} v{found_version}, active taxonomy is {expected_name} v{expected_version}")]
    TaxonomyMismatch {
        expected_name: String,
        expected_version: String,
        found_name: String,
        found_version: String,
    },
    #[error("asn {0} appears more than once")]
    DuplicateAsn(u32),
    #[error("invalid tag set for asn {asn}: {reason}")]
    InvalidRow { asn: u32, reason: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("synthetic spec: tag {0} has no {1}")]
    SpecIncomplete(TagId, &'static str),
}

fn validate_rows(corpus: &AnnotatedCorpus, taxonomy: &Taxonomy) -> Result<(), CorpusError> {
    if corpus.taxonomy_name != taxonomy.name() || corpus.taxonomy_version != taxonomy.version() {
        return Err(CorpusError::TaxonomyMismatch {
            expected_name: taxonomy.name().to_string(),
            expected_version: taxonomy.version().to_string(),
            found_name: corpus.taxonomy_name.clone(),
            found_version: corpus.taxonomy_version.clone(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for row in &corpus.rows {
        if !seen.insert(row.asn) {
            return Err(CorpusError::DuplicateAsn(row.asn));
        }
        let violations = taxonomy
            .validate_tagset(&row.tags)
            .map_err(|e| CorpusError::InvalidRow { asn: row.asn, reason: e.to_string() })?;
        if !violations.is_empty() {
            let reason =
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(CorpusError::InvalidRow { asn: row.asn, reason });
        }
    }
    Ok(())
}

fn parse_preamble(line: &str) -> Option<(String, String)> {
    let rest = line.strip_prefix('#')?.trim();
    let mut name = None;
    let mut version = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("taxonomy=") {
            name = Some(v.to_string());
        } else if let Some(v) = part.strip_prefix("version=") {
            version = Some(v.to_string());
        }
    }
    Some((name?, version?))
}

fn load_csv(text: &str, taxonomy: &Taxonomy) -> Result<AnnotatedCorpus, CorpusError> {
    let first = text.lines().next().unwrap_or_default();
    let (taxonomy_name, taxonomy_version) =
        parse_preamble(first).ok_or(CorpusError::MissingPreamble)?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let asn_col = column("asn").unwrap_or(0);
    let tags_col = column("tags").unwrap_or(1);
    let note_col = column("note");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let asn_text = record.get(asn_col).unwrap_or_default();
        let asn = asn_text.trim().parse::<u32>().map_err(|_| CorpusError::InvalidRow {
            asn: 0,
            reason: format!("unparseable asn {asn_text:?}"),
        })?;
        let mut tags = TagSet::new();
        for part in record.get(tags_col).unwrap_or_default().split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let tag = TagId::new(part)
                .map_err(|e| CorpusError::InvalidRow { asn, reason: e.to_string() })?;
            tags.insert(tag);
        }
        let note = note_col.and_then(|c| record.get(c)).unwrap_or_default().to_string();
        rows.push(CorpusRow { asn, tags, note });
    }
    let corpus = AnnotatedCorpus { taxonomy_name, taxonomy_version, rows };
    validate_rows(&corpus, taxonomy)?;
    Ok(corpus)
}

fn load_json(text: &str, taxonomy: &Taxonomy) -> Result<AnnotatedCorpus, CorpusError> {
    let corpus: AnnotatedCorpus =
        serde_json::from_str(text).map_err(|e| CorpusError::Json(e.to_string()))?;
    validate_rows(&corpus, taxonomy)?;
    Ok(corpus)
}

/// Loads and validates a corpus file; the format is chosen by extension
/// (`.json` for the JSON variant, CSV otherwise).
pub fn load_corpus(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<AnnotatedCorpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        load_json(&text, taxonomy)
    } else {
        load_csv(&text, taxonomy)
    }
}

fn render_csv(corpus: &AnnotatedCorpus) -> Result<Vec<u8>, CorpusError> {
    let mut out = Vec::new();
    writeln!(
        out,
        "# taxonomy={} version={}",
        corpus.taxonomy_name, corpus.taxonomy_version
    )?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["asn", "tags", "note"])?;
    for row in &corpus.rows {
        writer.write_record([row.asn.to_string(), row.tags.to_string(), row.note.clone()])?;
    }
    Ok(writer.into_inner().expect("csv buffer"))
}

/// Writes a corpus; format chosen by extension like [`load_corpus`].
pub fn save_corpus(corpus: &AnnotatedCorpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let bytes = if path.extension().is_some_and(|e| e == "json") {
        serde_json::to_vec_pretty(corpus).map_err(|e| CorpusError::Json(e.to_string()))?
    } else {
        render_csv(corpus)?
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Per-category and per-subcategory annotation counts, in taxonomy order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_top: Vec<(TagId, usize)>,
    pub per_sub: Vec<(TagId, usize)>,
    pub rows: usize,
}

pub fn corpus_stats(corpus: &AnnotatedCorpus, taxonomy: &Taxonomy) -> CorpusStats {
    let mut counts: BTreeMap<&TagId, usize> = BTreeMap::new();
    for row in &corpus.rows {
        for tag in row.tags.iter() {
            *counts.entry(tag).or_insert(0) += 1;
        }
    }
    let collect = |level: Level| {
        taxonomy
            .nodes()
            .iter()
            .filter(|n| n.level == level)
            .map(|n| (n.id.clone(), counts.get(&n.id).copied().unwrap_or(0)))
            .collect()
    };
    CorpusStats { per_top: collect(Level::Top), per_sub: collect(Level::Sub), rows: corpus.rows.len() }
}

impl CorpusStats {
    /// Category rows with their subcategories indented beneath them.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<40} {:>8}", "category/subcategory", "count");
        for (top, count) in &self.per_top {
            let _ = writeln!(out, "{:<40} {:>8}", top.as_str(), count);
            for (sub, sub_count) in &self.per_sub {
                if sub.qualified_parent().as_ref() == Some(top) {
                    let _ = writeln!(out, "  {:<38} {:>8}", sub.leaf(), sub_count);
                }
            }
        }
        let _ = writeln!(out, "{:<40} {:>8}", "total rows", self.rows);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::builtin;

    fn tag(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    fn sample_corpus() -> AnnotatedCorpus {
        AnnotatedCorpus {
            taxonomy_name: "linnaeus-v1".into(),
            taxonomy_version: "1".into(),
            rows: vec![
                CorpusRow {
                    asn: 64500,
                    tags: [tag("government"), tag("government.executive")].into_iter().collect(),
                    note: "manual".into(),
                },
                CorpusRow {
                    asn: 64501,
                    tags: [tag("access"), tag("access.small")].into_iter().collect(),
                    note: String::new(),
                },
                CorpusRow { asn: 64502, tags: TagSet::new(), note: "unlabeled".into() },
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        let corpus = sample_corpus();
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path, &tax).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        let corpus = sample_corpus();
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path, &tax).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn orphan_sub_tag_names_the_asn() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        let mut corpus = sample_corpus();
        corpus.rows[1].tags = [tag("government.executive")].into_iter().collect();
        save_corpus(&corpus, &path).unwrap();
        let err = load_corpus(&path, &tax).unwrap_err();
        match err {
            CorpusError::InvalidRow { asn, .. } => assert_eq!(asn, 64501),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn taxonomy_version_mismatch_is_an_error() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        let mut corpus = sample_corpus();
        corpus.taxonomy_name = "naicslite-v1".into();
        save_corpus(&corpus, &path).unwrap();
        assert!(matches!(load_corpus(&path, &tax), Err(CorpusError::TaxonomyMismatch { .. })));
    }

    #[test]
    fn duplicate_asn_is_an_error() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        let mut corpus = sample_corpus();
        corpus.rows[1].asn = 64500;
        save_corpus(&corpus, &path).unwrap();
        assert!(matches!(load_corpus(&path, &tax), Err(CorpusError::DuplicateAsn(64500))));
    }

    #[test]
    fn unknown_csv_columns_are_ignored() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        std::fs::write(
            &path,
            "# taxonomy=linnaeus-v1 version=1\nasn,tags,note,reviewer,extra\n64500,ixp,manual,alice,x\n",
        )
        .unwrap();
        let corpus = load_corpus(&path, &tax).unwrap();
        assert_eq!(corpus.rows.len(), 1);
        assert!(corpus.rows[0].tags.contains(&tag("ixp")));
    }

    #[test]
    fn missing_preamble_is_an_error() {
        let tax = builtin::default_taxonomy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        std::fs::write(&path, "asn,tags,note\n64500,ixp,\n").unwrap();
        assert!(matches!(load_corpus(&path, &tax), Err(CorpusError::MissingPreamble)));
    }

    #[test]
    fn stats_count_both_levels() {
        let tax = builtin::default_taxonomy();
        let stats = corpus_stats(&sample_corpus(), &tax);
        let get = |list: &[(TagId, usize)], t: &str| {
            list.iter().find(|(id, _)| id == &tag(t)).map(|(_, c)| *c).unwrap()
        };
        assert_eq!(get(&stats.per_top, "government"), 1);
        assert_eq!(get(&stats.per_top, "access"), 1);
        assert_eq!(get(&stats.per_top, "ixp"), 0);
        assert_eq!(get(&stats.per_sub, "government.executive"), 1);
        assert_eq!(get(&stats.per_sub, "access.small"), 1);
        assert_eq!(stats.rows, 3);
    }

    #[test]
    fn stats_totals_match_tag_multiplicities() {
        let tax = builtin::default_taxonomy();
        let corpus = sample_corpus();
        let stats = corpus_stats(&corpus, &tax);
        let total: usize = stats.per_top.iter().chain(&stats.per_sub).map(|(_, c)| c).sum();
        let multiplicity: usize = corpus.rows.iter().map(|r| r.tags.len()).sum();
        assert_eq!(total, multiplicity);
    }

    #[test]
    fn empty_corpus_stats_are_all_zero() {
        let tax = builtin::default_taxonomy();
        let corpus = AnnotatedCorpus {
            taxonomy_name: "linnaeus-v1".into(),
            taxonomy_version: "1".into(),
            rows: vec![],
        };
        let stats = corpus_stats(&corpus, &tax);
        assert!(stats.per_top.iter().all(|(_, c)| *c == 0));
        assert!(stats.per_sub.iter().all(|(_, c)| *c == 0));
        let text = stats.render_text();
        assert!(text.contains("government"));
    }
}
