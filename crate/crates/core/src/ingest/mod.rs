//! Parsers for the five external data sources and the priority merge that
//! fuses them into one record per ASN.
//!
//! AS-Rank defines the ASN universe; the other sources only enrich it. For the
//! overlapping semantic fields the merge prefers IPinfo, then PeeringDB, then
//! RDAP, then AS-Rank, and records which source supplied each field.

pub mod asrank;
pub mod coverage;
pub mod eyeball;
pub mod ipinfo;
pub mod merge;
pub mod peeringdb;
pub mod rdap;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asrank::{parse_asrank, AsRankRecord};
pub use coverage::CoverageReport;
pub use eyeball::{parse_eyeball, EyeballRecord};
pub use ipinfo::{parse_ipinfo, IpinfoRecord};
pub use merge::{
    merge_records, rdap_candidates, read_merged, write_merged, FieldProvenance, MergeOutcome,
    MergedAsRecord, Provenance, MERGED_SCHEMA_HEADER,
};
pub use peeringdb::{parse_peeringdb, Facility, IxpPort, PeeringDbRecord};
pub use rdap::{NoRdap, RdapClient, RdapLookup, RdapRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("no parseable records in input")]
    NoRecords,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("snapshot is missing the {0:?} table")]
    MissingTable(&'static str),
    #[error("invalid snapshot document: {0}")]
    InvalidDocument(String),
    #[error("rdap response for AS{asn} did not parse: {reason}")]
    RdapParse { asn: u32, reason: String },
    #[error("http: {0}")]
    Http(String),
    #[error("dataset header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: String, found: String },
}

/// Result of a line-oriented parse: good records plus counts of what was
/// tolerated along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    /// Lines that did not parse and were skipped.
    pub skipped: usize,
    /// ASNs that appeared more than once; the last occurrence won.
    pub duplicate_asns: usize,
}

impl<T> ParseOutcome<T> {
    fn new(records: Vec<T>, skipped: usize, duplicate_asns: usize) -> Self {
        ParseOutcome { records, skipped, duplicate_asns }
    }
}

impl<T> Default for ParseOutcome<T> {
    fn default() -> Self {
        ParseOutcome { records: Vec::new(), skipped: 0, duplicate_asns: 0 }
    }
}

/// Keeps the last occurrence per ASN, preserving first-seen order, and counts
/// how many earlier rows were replaced.
fn dedupe_last_wins<T>(records: Vec<T>, asn_of: impl Fn(&T) -> u32) -> (Vec<T>, usize) {
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut duplicates = 0usize;
    let mut keep_from_end: Vec<bool> = vec![true; records.len()];
    for (i, record) in records.iter().enumerate().rev() {
        if !seen.insert(asn_of(record)) {
            keep_from_end[i] = false;
            duplicates += 1;
        }
    }
    let mut out = Vec::with_capacity(records.len() - duplicates);
    for (record, keep) in records.into_iter().zip(keep_from_end) {
        if keep {
            out.push(record);
        }
    }
    (out, duplicates)
}

/// Treats empty and whitespace-only strings as absent.
fn non_empty(s: Option<String>) -> Option<String> {
    s.and_then(|v| {
        let trimmed = v.trim();
        if trimmed.is_empty() { None } else { Some(trimmed.to_string()) }
    })
}

/// Accepts `64500` and `"AS64500"` style ASN spellings.
fn parse_asn_text(text: &str) -> Option<u32> {
    let t = text.trim();
    let t = t.strip_prefix("AS").or_else(|| t.strip_prefix("as")).unwrap_or(t);
    t.parse::<u32>().ok().filter(|&a| a > 0)
}
