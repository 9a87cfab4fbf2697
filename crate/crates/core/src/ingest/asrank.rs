//! AS-Rank export parser (line-delimited JSON, one object per ASN).

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{dedupe_last_wins, non_empty, IngestError, ParseOutcome};

/// Topology, identity and cone statistics for one ASN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsRankRecord {
    pub asn: u32,
    pub as_name: Option<String>,
    pub org_name: Option<String>,
    pub country: Option<String>,
    pub cone_asns: u64,
    pub cone_addresses: u64,
    pub cone_prefixes: u64,
    pub degree_total: u64,
    pub degree_provider: u64,
    pub degree_customer: u64,
    pub degree_peer: u64,
    pub originated_addresses: u64,
    pub originated_prefixes: u64,
    pub cone_countries: BTreeSet<String>,
}

/// ASN fields show up both as numbers and as strings in the wild.
#[derive(Deserialize)]
#[serde(untagged)]
enum AsnField {
    Number(u64),
    Text(String),
}

impl AsnField {
    fn value(&self) -> Option<u32> {
        match self {
            AsnField::Number(n) => u32::try_from(*n).ok().filter(|&a| a > 0),
            AsnField::Text(t) => super::parse_asn_text(t),
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct RawCone {
    #[serde(rename = "numberAsns")]
    number_asns: u64,
    #[serde(rename = "numberPrefixes")]
    number_prefixes: u64,
    #[serde(rename = "numberAddresses")]
    number_addresses: u64,
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct RawDegree {
    total: u64,
    provider: u64,
    customer: u64,
    peer: u64,
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct RawOrg {
    #[serde(rename = "orgName")]
    org_name: Option<String>,
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct RawCountry {
    iso: Option<String>,
}

#[derive(Deserialize)]
struct RawAsRank {
    asn: AsnField,
    #[serde(default, rename = "asnName")]
    asn_name: Option<String>,
    #[serde(default)]
    organization: RawOrg,
    #[serde(default)]
    country: RawCountry,
    #[serde(default)]
    cone: RawCone,
    #[serde(default, rename = "asnDegree")]
    asn_degree: RawDegree,
    #[serde(default)]
    announcing: RawCone,
    #[serde(default, rename = "coneCountries")]
    cone_countries: Vec<String>,
}

fn record_from_raw(raw: RawAsRank) -> Option<AsRankRecord> {
    let asn = raw.asn.value()?;
    let record = AsRankRecord {
        asn,
        as_name: non_empty(raw.asn_name),
        org_name: non_empty(raw.organization.org_name),
        country: non_empty(raw.country.iso),
        cone_asns: raw.cone.number_asns,
        cone_addresses: raw.cone.number_addresses,
        cone_prefixes: raw.cone.number_prefixes,
        degree_total: raw.asn_degree.total,
        degree_provider: raw.asn_degree.provider,
        degree_customer: raw.asn_degree.customer,
        degree_peer: raw.asn_degree.peer,
        originated_addresses: raw.announcing.number_addresses,
        originated_prefixes: raw.announcing.number_prefixes,
        cone_countries: raw.cone_countries.into_iter().filter(|c| !c.is_empty()).collect(),
    };
    let max_component = record
        .degree_provider
        .max(record.degree_customer)
        .max(record.degree_peer);
    if record.degree_total < max_component {
        return None;
    }
    Some(record)
}

/// One record per ASN, unknown fields ignored; malformed lines are counted and
/// skipped rather than failing the whole stream.
pub fn parse_asrank(input: impl BufRead) -> Result<ParseOutcome<AsRankRecord>, IngestError> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawAsRank>(&line).ok().and_then(record_from_raw) {
            Some(record) => records.push(record),
            None => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(IngestError::NoRecords);
    }
    let (records, duplicates) = dedupe_last_wins(records, |r| r.asn);
    Ok(ParseOutcome::new(records, skipped, duplicates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const LINE: &str = r#"{"asn":"64500","asnName":"EXAMPLE-AS","organization":{"orgName":"Example Org"},"country":{"iso":"US"},"cone":{"numberAsns":10,"numberPrefixes":20,"numberAddresses":4096},"asnDegree":{"total":12,"provider":2,"customer":9,"peer":1},"announcing":{"numberPrefixes":5,"numberAddresses":1024},"coneCountries":["US","CA"]}"#;

    #[test]
    fn parses_full_record() {
        let out = parse_asrank(Cursor::new(LINE)).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.asn, 64500);
        assert_eq!(r.as_name.as_deref(), Some("EXAMPLE-AS"));
        assert_eq!(r.org_name.as_deref(), Some("Example Org"));
        assert_eq!(r.cone_asns, 10);
        assert_eq!(r.originated_addresses, 1024);
        assert_eq!(r.cone_countries.len(), 2);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_asrank(Cursor::new("")), Err(IngestError::NoRecords)));
    }

    #[test]
    fn corrupt_line_is_counted_and_skipped() {
        let input = format!("{LINE}\nnot json at all\n{}\n", LINE.replace("64500", "64501"));
        let out = parse_asrank(Cursor::new(input)).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn numeric_asn_and_unknown_fields_accepted() {
        let line = r#"{"asn":64502,"rank":17,"seen":true}"#;
        let out = parse_asrank(Cursor::new(line)).unwrap();
        assert_eq!(out.records[0].asn, 64502);
        assert_eq!(out.records[0].cone_asns, 0);
        assert!(out.records[0].as_name.is_none());
    }

    #[test]
    fn inconsistent_degrees_are_skipped() {
        let line = r#"{"asn":64503,"asnDegree":{"total":1,"provider":5,"customer":0,"peer":0}}"#;
        let input = format!("{line}\n{LINE}");
        let out = parse_asrank(Cursor::new(input)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn duplicate_asn_last_wins() {
        let second = LINE.replace("EXAMPLE-AS", "SECOND-AS");
        let input = format!("{LINE}\n{second}");
        let out = parse_asrank(Cursor::new(input)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.duplicate_asns, 1);
        assert_eq!(out.records[0].as_name.as_deref(), Some("SECOND-AS"));
    }
}
