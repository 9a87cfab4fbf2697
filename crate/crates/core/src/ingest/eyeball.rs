//! Eyeball-population CSV parser (columns: asn, users, optional country).
//!
//! The upstream portal publishes no formal schema; this layout is the
//! artifact's declared assumption and is isolated here.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{dedupe_last_wins, non_empty, parse_asn_text, IngestError, ParseOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeballRecord {
    pub asn: u32,
    pub estimated_users: u64,
    pub sample_country: Option<String>,
}

pub fn parse_eyeball(input: impl Read) -> Result<ParseOutcome<EyeballRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for row in reader.records() {
        let Ok(row) = row else {
            skipped += 1;
            continue;
        };
        let asn = row.get(0).and_then(parse_asn_text);
        let users = row.get(1).and_then(|u| u.trim().parse::<u64>().ok());
        match (asn, users) {
            (Some(asn), Some(estimated_users)) => records.push(EyeballRecord {
                asn,
                estimated_users,
                sample_country: non_empty(row.get(2).map(str::to_string)),
            }),
            _ => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(IngestError::NoRecords);
    }
    let (records, duplicates) = dedupe_last_wins(records, |r| r.asn);
    Ok(ParseOutcome::new(records, skipped, duplicates))
}
