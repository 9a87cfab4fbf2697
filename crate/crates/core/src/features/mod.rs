//! Feature construction: numeric/categorical vectors for the structured-data
//! classifier and semantic contexts for the language-model stage.

pub mod continent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::MergedAsRecord;
use continent::continent_of;

/// Names of the numeric slots, in vector order.
pub const NUMERIC_FEATURES: [&str; 13] = [
    "deg_total",
    "deg_provider",
    "deg_customer",
    "cone_asns",
    "cone_addrs",
    "cone_prefixes",
    "orig_prefixes",
    "orig_addrs",
    "users",
    "ixp_port_mbps_total",
    "n_facilities",
    "n_facility_countries",
    "n_cone_countries",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot compute a percentile of an empty list")]
    EmptyConeSizes,
}

/// Fitted category-to-slot maps for the one-hot blocks. Each block carries a
/// trailing "unknown" bucket for values unseen at fit time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub countries: Vec<String>,
    pub continents: Vec<String>,
    pub traffic_tiers: Vec<String>,
    pub geo_scopes: Vec<String>,
}

impl CategoricalEncoding {
    /// Collects the distinct category values of the training records, sorted.
    pub fn fit(records: &[MergedAsRecord]) -> Self {
        let mut countries = std::collections::BTreeSet::new();
        let mut continents = std::collections::BTreeSet::new();
        let mut tiers = std::collections::BTreeSet::new();
        let mut scopes = std::collections::BTreeSet::new();
        for r in records {
            if let Some(c) = &r.as_country {
                countries.insert(c.clone());
                if let Some(cont) = continent_of(c) {
                    continents.insert(cont.to_string());
                }
            }
            if let Some(t) = &r.traffic_tier {
                tiers.insert(t.clone());
            }
            if let Some(s) = &r.geo_scope {
                scopes.insert(s.clone());
            }
        }
        CategoricalEncoding {
            countries: countries.into_iter().collect(),
            continents: continents.into_iter().collect(),
            traffic_tiers: tiers.into_iter().collect(),
            geo_scopes: scopes.into_iter().collect(),
        }
    }

    /// Total vector width: numeric block plus the four one-hot blocks, each
    /// with its unknown bucket.
    pub fn width(&self) -> usize {
        NUMERIC_FEATURES.len()
            + self.countries.len()
            + 1
            + self.continents.len()
            + 1
            + self.traffic_tiers.len()
            + 1
            + self.geo_scopes.len()
            + 1
    }
}

/// The structured-data classifier's input for one AS: 13 numeric slots (NaN
/// where missing, mirrored in `missing`) followed by the one-hot blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFeatureVector {
    pub values: Vec<f64>,
    /// One bit per numeric slot; set iff the slot carries the NaN sentinel.
    pub missing: Vec<bool>,
}

fn one_hot(block: &mut Vec<f64>, vocabulary: &[String], value: Option<&str>) {
    let start = block.len();
    block.extend(std::iter::repeat_n(0.0, vocabulary.len() + 1));
    let slot = match value {
        Some(v) => vocabulary.iter().position(|known| known == v).unwrap_or(vocabulary.len()),
        None => vocabulary.len(),
    };
    block[start + slot] = 1.0;
}

/// Deterministic feature extraction. Missing numerics keep the NaN sentinel
/// for the imputer; unseen categories map to the unknown bucket.
pub fn build_network_features(
    record: &MergedAsRecord,
    encoding: &CategoricalEncoding,
) -> NetworkFeatureVector {
    let mut values = Vec::with_capacity(encoding.width());
    let mut missing = Vec::with_capacity(NUMERIC_FEATURES.len());
    let push = |value: Option<f64>, values: &mut Vec<f64>, missing: &mut Vec<bool>| match value
    {
        Some(v) => {
            values.push(v);
            missing.push(false);
        }
        None => {
            values.push(f64::NAN);
            missing.push(true);
        }
    };

    // PeeringDB-derived counts are unknown (not zero) when the network has no
    // PeeringDB record at all.
    let has_pdb = record.ixp_port_mbps_total.is_some();
    let facility_countries = record
        .facilities
        .iter()
        .filter_map(|f| f.country.as_deref())
        .collect::<std::collections::BTreeSet<_>>()
        .len();

    push(Some(record.deg_total as f64), &mut values, &mut missing);
    push(Some(record.deg_provider as f64), &mut values, &mut missing);
    push(Some(record.deg_customer as f64), &mut values, &mut missing);
    push(Some(record.cone_asns as f64), &mut values, &mut missing);
    push(Some(record.cone_addrs as f64), &mut values, &mut missing);
    push(Some(record.cone_prefixes as f64), &mut values, &mut missing);
    push(Some(record.orig_prefixes as f64), &mut values, &mut missing);
    push(Some(record.orig_addrs as f64), &mut values, &mut missing);
    push(record.users.map(|u| u as f64), &mut values, &mut missing);
    push(record.ixp_port_mbps_total.map(|p| p as f64), &mut values, &mut missing);
    push(has_pdb.then_some(record.facilities.len() as f64), &mut values, &mut missing);
    push(has_pdb.then_some(facility_countries as f64), &mut values, &mut missing);
    push(Some(record.cone_countries.len() as f64), &mut values, &mut missing);

    one_hot(&mut values, &encoding.countries, record.as_country.as_deref());
    one_hot(
        &mut values,
        &encoding.continents,
        record.as_country.as_deref().and_then(continent_of),
    );
    one_hot(&mut values, &encoding.traffic_tiers, record.traffic_tier.as_deref());
    one_hot(&mut values, &encoding.geo_scopes, record.geo_scope.as_deref());

    debug_assert_eq!(values.len(), encoding.width());
    NetworkFeatureVector { values, missing }
}

/// The language-model stage's input for one AS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticContext {
    pub asn: u32,
    pub as_name: Option<String>,
    pub org_name: Option<String>,
    pub as_country: Option<String>,
    pub org_country: Option<String>,
    pub website: Option<String>,
}

/// `None` when the record carries no name at all: such records cannot be
/// submitted to the language model and fall back to the structured branch.
pub fn build_semantic_context(record: &MergedAsRecord) -> Option<SemanticContext> {
    if record.as_name.is_none() && record.org_name.is_none() {
        return None;
    }
    Some(SemanticContext {
        asn: record.asn,
        as_name: record.as_name.clone(),
        org_name: record.org_name.clone(),
        as_country: record.as_country.clone(),
        org_country: record.org_country.clone(),
        website: record.website.clone(),
    })
}

/// The percentile (0..=1) separating large from small access networks.
pub const ACCESS_SIZE_PERCENTILE: f64 = 0.8;

/// q-th percentile with linear interpolation between closest ranks.
fn percentile_linear(values: &[u64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lower = h.floor() as usize;
    let upper = (lower + 1).min(n - 1);
    sorted[lower] + (h - lower as f64) * (sorted[upper] - sorted[lower])
}

/// 80th percentile of the customer-cone sizes of access-tagged training ASes;
/// the corpus-annotation threshold between the two access tiers.
pub fn access_size_threshold(cone_sizes: &[u64]) -> Result<f64, FeatureError> {
    if cone_sizes.is_empty() {
        return Err(FeatureError::EmptyConeSizes);
    }
    Ok(percentile_linear(cone_sizes, ACCESS_SIZE_PERCENTILE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessSize {
    Large,
    Small,
}

/// Large iff the cone size reaches the threshold (ties count as large).
pub fn classify_access_size(cone_size: u64, threshold: f64) -> AccessSize {
    if cone_size as f64 >= threshold {
        AccessSize::Large
    } else {
        AccessSize::Small
    }
}
