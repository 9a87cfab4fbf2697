//! IPinfo ASN CSV parser (columns: asn, name, domain, country).

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{dedupe_last_wins, non_empty, parse_asn_text, IngestError, ParseOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpinfoRecord {
    pub asn: u32,
    pub as_name: Option<String>,
    pub website: Option<String>,
    pub country: Option<String>,
}

pub fn parse_ipinfo(input: impl Read) -> Result<ParseOutcome<IpinfoRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for row in reader.records() {
        let Ok(row) = row else {
            skipped += 1;
            continue;
        };
        let Some(asn) = row.get(0).and_then(parse_asn_text) else {
            skipped += 1;
            continue;
        };
        records.push(IpinfoRecord {
            asn,
            as_name: non_empty(row.get(1).map(str::to_string)),
            website: non_empty(row.get(2).map(str::to_string)),
            country: non_empty(row.get(3).map(str::to_string)),
        });
    }
    if records.is_empty() {
        return Err(IngestError::NoRecords);
    }
    let (records, duplicates) = dedupe_last_wins(records, |r| r.asn);
    Ok(ParseOutcome::new(records, skipped, duplicates))
}
