//! Priority merge of the parsed sources into one record per ASN.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    AsRankRecord, EyeballRecord, Facility, IngestError, IpinfoRecord, PeeringDbRecord, RdapLookup,
};

/// Which source supplied a semantic field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ipinfo,
    Peeringdb,
    Rdap,
    Asrank,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProvenance {
    pub as_name: Provenance,
    pub org_name: Provenance,
    pub website: Provenance,
    pub as_country: Provenance,
    pub org_country: Provenance,
}

/// One ASN's fused view across all sources. Field names match the merged-file
/// schema exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedAsRecord {
    pub asn: u32,
    pub as_name: Option<String>,
    pub org_name: Option<String>,
    pub as_country: Option<String>,
    pub org_country: Option<String>,
    pub website: Option<String>,
    pub users: Option<u64>,
    pub cone_asns: u64,
    pub cone_addrs: u64,
    pub cone_prefixes: u64,
    pub deg_total: u64,
    pub deg_provider: u64,
    pub deg_customer: u64,
    pub deg_peer: u64,
    pub orig_addrs: u64,
    pub orig_prefixes: u64,
    pub cone_countries: BTreeSet<String>,
    pub facilities: Vec<Facility>,
    /// Sum of IXP port capacities; absent when the network has no PeeringDB
    /// record at all (0 means a record with no ports).
    pub ixp_port_mbps_total: Option<u64>,
    pub traffic_tier: Option<String>,
    pub traffic_asym: Option<String>,
    pub geo_scope: Option<String>,
    pub provenance: FieldProvenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub records: Vec<MergedAsRecord>,
    /// Distinct ASNs seen in enrichment sources but absent from AS-Rank.
    pub dropped_foreign_asns: usize,
    /// ASNs for which the RDAP lookup was consulted.
    pub rdap_lookups: usize,
}

fn pick<'a>(
    candidates: &[(Provenance, Option<&'a str>)],
) -> (Option<&'a str>, Provenance) {
    for (source, value) in candidates {
        if let Some(v) = value {
            return (Some(v), *source);
        }
    }
    (None, Provenance::Absent)
}

/// The ASNs the merge will consult RDAP for: those whose org name is still
/// missing after IPinfo and PeeringDB. Useful for warming the RDAP cache with
/// bounded parallelism before the single-threaded merge pass.
pub fn rdap_candidates(asrank: &[AsRankRecord], peeringdb: &[PeeringDbRecord]) -> Vec<u32> {
    let with_org: BTreeSet<u32> =
        peeringdb.iter().filter(|r| r.org_name.is_some()).map(|r| r.asn).collect();
    asrank.iter().map(|r| r.asn).filter(|asn| !with_org.contains(asn)).collect()
}

/// Fuses the sources over the AS-Rank universe. Per semantic field the
/// priority is IPinfo, then PeeringDB, then RDAP, then AS-Rank; the RDAP
/// lookup is only consulted for ASNs whose org name is still missing after
/// IPinfo and PeeringDB. Numeric topology comes from AS-Rank alone.
pub fn merge_records(
    asrank: &[AsRankRecord],
    peeringdb: &[PeeringDbRecord],
    ipinfo: &[IpinfoRecord],
    eyeball: &[EyeballRecord],
    rdap: &impl RdapLookup,
) -> MergeOutcome {
    let pdb: BTreeMap<u32, &PeeringDbRecord> = peeringdb.iter().map(|r| (r.asn, r)).collect();
    let ipi: BTreeMap<u32, &IpinfoRecord> = ipinfo.iter().map(|r| (r.asn, r)).collect();
    let eye: BTreeMap<u32, &EyeballRecord> = eyeball.iter().map(|r| (r.asn, r)).collect();

    let universe: BTreeMap<u32, &AsRankRecord> = asrank.iter().map(|r| (r.asn, r)).collect();
    let mut foreign: BTreeSet<u32> = BTreeSet::new();
    for asn in pdb.keys().chain(ipi.keys()).chain(eye.keys()) {
        if !universe.contains_key(asn) {
            foreign.insert(*asn);
        }
    }

    let mut rdap_lookups = 0usize;
    let mut records = Vec::with_capacity(universe.len());
    for (&asn, base) in &universe {
        let p = pdb.get(&asn);
        let i = ipi.get(&asn);

        let org_from_pdb = p.and_then(|r| r.org_name.as_deref());
        let rdap_record = if org_from_pdb.is_none() {
            rdap_lookups += 1;
            rdap.lookup(asn)
        } else {
            None
        };
        let r = rdap_record.as_ref();

        let (as_name, as_name_src) = pick(&[
            (Provenance::Ipinfo, i.and_then(|r| r.as_name.as_deref())),
            (Provenance::Asrank, base.as_name.as_deref()),
        ]);
        let (org_name, org_name_src) = pick(&[
            (Provenance::Peeringdb, org_from_pdb),
            (Provenance::Rdap, r.and_then(|r| r.org_name.as_deref())),
            (Provenance::Asrank, base.org_name.as_deref()),
        ]);
        let (website, website_src) = pick(&[
            (Provenance::Ipinfo, i.and_then(|r| r.website.as_deref())),
            (Provenance::Peeringdb, p.and_then(|r| r.website.as_deref())),
        ]);
        let (as_country, as_country_src) = pick(&[
            (Provenance::Ipinfo, i.and_then(|r| r.country.as_deref())),
            (Provenance::Asrank, base.country.as_deref()),
        ]);
        let (org_country, org_country_src) =
            pick(&[(Provenance::Rdap, r.and_then(|r| r.country.as_deref()))]);

        records.push(MergedAsRecord {
            asn,
            as_name: as_name.map(str::to_string),
            org_name: org_name.map(str::to_string),
            as_country: as_country.map(str::to_string),
            org_country: org_country.map(str::to_string),
            website: website.map(str::to_string),
            users: eye.get(&asn).map(|r| r.estimated_users),
            cone_asns: base.cone_asns,
            cone_addrs: base.cone_addresses,
            cone_prefixes: base.cone_prefixes,
            deg_total: base.degree_total,
            deg_provider: base.degree_provider,
            deg_customer: base.degree_customer,
            deg_peer: base.degree_peer,
            orig_addrs: base.originated_addresses,
            orig_prefixes: base.originated_prefixes,
            cone_countries: base.cone_countries.clone(),
            facilities: p.map(|r| r.facilities.clone()).unwrap_or_default(),
            ixp_port_mbps_total: p.map(|r| r.ixp_port_mbps_total()),
            traffic_tier: p.and_then(|r| r.traffic_tier.clone()),
            traffic_asym: p.and_then(|r| r.traffic_asymmetry.clone()),
            geo_scope: p.and_then(|r| r.geo_scope.clone()),
            provenance: FieldProvenance {
                as_name: as_name_src,
                org_name: org_name_src,
                website: website_src,
                as_country: as_country_src,
                org_country: org_country_src,
            },
        });
    }

    MergeOutcome { records, dropped_foreign_asns: foreign.len(), rdap_lookups }
}

pub const MERGED_SCHEMA_HEADER: &str = r#"{"schema":"merged-as-records","version":1}"#;

/// Writes the merged dataset as line-delimited JSON with a schema header line.
pub fn write_merged(records: &[MergedAsRecord], mut w: impl Write) -> Result<(), IngestError> {
    writeln!(w, "{MERGED_SCHEMA_HEADER}")?;
    for record in records {
        serde_json::to_writer(&mut w, record)
            .map_err(|e| IngestError::InvalidDocument(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a merged dataset, validating the schema header line.
pub fn read_merged(input: impl BufRead) -> Result<Vec<MergedAsRecord>, IngestError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let expected: serde_json::Value =
        serde_json::from_str(MERGED_SCHEMA_HEADER).expect("static header parses");
    let found: serde_json::Value = serde_json::from_str(&header)
        .map_err(|_| IngestError::HeaderMismatch {
            expected: MERGED_SCHEMA_HEADER.to_string(),
            found: header.clone(),
        })?;
    if found != expected {
        return Err(IngestError::HeaderMismatch {
            expected: MERGED_SCHEMA_HEADER.to_string(),
            found: header,
        });
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MergedAsRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::InvalidDocument(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}
