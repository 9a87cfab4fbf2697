//! Per-source, per-field coverage accounting for the ingest report.

use serde::{Deserialize, Serialize};

use super::{AsRankRecord, EyeballRecord, IpinfoRecord, PeeringDbRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub peeringdb_total: u64,
    pub peeringdb_website: u64,
    pub peeringdb_network_type: u64,
    pub peeringdb_geo_scope: u64,
    pub peeringdb_peering_ratio: u64,
    pub peeringdb_netfac: u64,
    pub peeringdb_netixlan: u64,
    pub ipinfo_total: u64,
    pub ipinfo_website: u64,
    pub asrank_total: u64,
    pub asrank_cones_inferred: u64,
    pub eyeball_total: u64,
}

impl CoverageReport {
    pub fn compute(
        asrank: &[AsRankRecord],
        peeringdb: &[PeeringDbRecord],
        ipinfo: &[IpinfoRecord],
        eyeball: &[EyeballRecord],
    ) -> Self {
        CoverageReport {
            peeringdb_total: peeringdb.len() as u64,
            peeringdb_website: peeringdb.iter().filter(|r| r.website.is_some()).count() as u64,
            peeringdb_network_type: peeringdb.iter().filter(|r| r.network_type.is_some()).count()
                as u64,
            peeringdb_geo_scope: peeringdb.iter().filter(|r| r.geo_scope.is_some()).count() as u64,
            peeringdb_peering_ratio: peeringdb
                .iter()
                .filter(|r| r.traffic_asymmetry.is_some())
                .count() as u64,
            peeringdb_netfac: peeringdb.iter().filter(|r| !r.facilities.is_empty()).count() as u64,
            peeringdb_netixlan: peeringdb.iter().filter(|r| !r.ixp_ports.is_empty()).count() as u64,
            ipinfo_total: ipinfo.len() as u64,
            ipinfo_website: ipinfo.iter().filter(|r| r.website.is_some()).count() as u64,
            asrank_total: asrank.len() as u64,
            asrank_cones_inferred: asrank.iter().filter(|r| r.cone_asns > 0).count() as u64,
            eyeball_total: eyeball.len() as u64,
        }
    }

    /// (label, count) rows in the report's canonical order.
    pub fn rows(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("Total network records", self.peeringdb_total),
            ("Website", self.peeringdb_website),
            ("Network-type", self.peeringdb_network_type),
            ("Geo-scope", self.peeringdb_geo_scope),
            ("Peering-ratio", self.peeringdb_peering_ratio),
            ("Facility (netfac)", self.peeringdb_netfac),
            ("IXP LAN (netixlan)", self.peeringdb_netixlan),
            ("IPinfo total ASNs", self.ipinfo_total),
            ("Website field present", self.ipinfo_website),
            ("CAIDA AS-Rank ASNs", self.asrank_total),
            ("Cones inferred", self.asrank_cones_inferred),
            ("AS-Pop total records", self.eyeball_total),
        ]
    }

    pub fn render_text(&self) -> String {
        let mut out = String::from("coverage\n");
        for (label, count) in self.rows() {
            out.push_str(&format!("  {label:<24} {count}\n"));
        }
        out
    }
}
