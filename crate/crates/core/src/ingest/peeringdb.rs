//! PeeringDB public-dump parser: joins the `net`, `netfac` and `netixlan`
//! object tables into one operator-reported record per network.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{dedupe_last_wins, non_empty, IngestError, ParseOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub id: u64,
    pub city: Option<String>,
    pub country: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IxpPort {
    pub ixp_id: u64,
    pub capacity_mbps: u64,
}

/// Operator-reported metadata for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeeringDbRecord {
    pub asn: u32,
    pub org_name: Option<String>,
    pub website: Option<String>,
    pub network_type: Option<String>,
    /// Self-declared capacity band, stored verbatim (e.g. "10-100 Gbps").
    pub traffic_tier: Option<String>,
    /// The info_ratio-style string, stored verbatim.
    pub traffic_asymmetry: Option<String>,
    pub geo_scope: Option<String>,
    pub facilities: Vec<Facility>,
    pub ixp_ports: Vec<IxpPort>,
}

impl PeeringDbRecord {
    pub fn ixp_port_mbps_total(&self) -> u64 {
        self.ixp_ports.iter().map(|p| p.capacity_mbps).sum()
    }
}

#[derive(Deserialize)]
struct Table<T> {
    #[serde(default = "Vec::new")]
    data: Vec<T>,
}

impl<T> Default for Table<T> {
    fn default() -> Self {
        Table { data: Vec::new() }
    }
}

#[derive(Deserialize)]
struct RawNet {
    id: u64,
    asn: u64,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    website: Option<String>,
    #[serde(default)]
    info_type: Option<String>,
    #[serde(default)]
    info_traffic: Option<String>,
    #[serde(default)]
    info_ratio: Option<String>,
    #[serde(default)]
    info_scope: Option<String>,
}

#[derive(Deserialize)]
struct RawNetFac {
    net_id: u64,
    fac_id: u64,
    #[serde(default)]
    city: Option<String>,
    #[serde(default)]
    country: Option<String>,
}

#[derive(Deserialize)]
struct RawNetIxLan {
    net_id: u64,
    ix_id: u64,
    #[serde(default)]
    speed: i64,
}

#[derive(Deserialize)]
struct RawDump {
    net: Option<Table<RawNet>>,
    #[serde(default)]
    netfac: Table<RawNetFac>,
    #[serde(default)]
    netixlan: Table<RawNetIxLan>,
}

/// Parses the snapshot document. Networks with unusable ASNs and link rows
/// with negative capacities are counted as skipped; a missing `net` table is
/// fatal.
pub fn parse_peeringdb(input: impl Read) -> Result<ParseOutcome<PeeringDbRecord>, IngestError> {
    let dump: RawDump = serde_json::from_reader(input)
        .map_err(|e| IngestError::InvalidDocument(e.to_string()))?;
    let Some(net) = dump.net else {
        return Err(IngestError::MissingTable("net"));
    };

    let mut facilities: BTreeMap<u64, Vec<Facility>> = BTreeMap::new();
    for row in dump.netfac.data {
        facilities.entry(row.net_id).or_default().push(Facility {
            id: row.fac_id,
            city: non_empty(row.city),
            country: non_empty(row.country),
        });
    }
    let mut ports: BTreeMap<u64, Vec<IxpPort>> = BTreeMap::new();
    let mut skipped = 0usize;
    for row in dump.netixlan.data {
        let Ok(capacity) = u64::try_from(row.speed) else {
            skipped += 1;
            continue;
        };
        ports.entry(row.net_id).or_default().push(IxpPort { ixp_id: row.ix_id, capacity_mbps: capacity });
    }

    let mut records = Vec::with_capacity(net.data.len());
    for raw in net.data {
        let Ok(asn) = u32::try_from(raw.asn) else {
            skipped += 1;
            continue;
        };
        if asn == 0 {
            skipped += 1;
            continue;
        }
        records.push(PeeringDbRecord {
            asn,
            org_name: non_empty(raw.name),
            website: non_empty(raw.website),
            network_type: non_empty(raw.info_type),
            traffic_tier: non_empty(raw.info_traffic),
            traffic_asymmetry: non_empty(raw.info_ratio),
            geo_scope: non_empty(raw.info_scope),
            facilities: facilities.remove(&raw.id).unwrap_or_default(),
            ixp_ports: ports.remove(&raw.id).unwrap_or_default(),
        });
    }
    let (records, duplicates) = dedupe_last_wins(records, |r| r.asn);
    Ok(ParseOutcome::new(records, skipped, duplicates))
}
