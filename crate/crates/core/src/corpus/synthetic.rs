//! Deterministic synthetic corpora for offline testing.
//!
//! Each generated AS gets a name carrying its tags' keywords (so the keyword
//! mock backend recovers the truth), numeric features drawn from per-category
//! profiles (so the structured branch carries signal too) and a matching gold
//! annotation. Generation is a pure function of the spec and its seed.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatedCorpus, CorpusError, CorpusRow};
use crate::ingest::{FieldProvenance, MergedAsRecord, Provenance};
use crate::taxonomy::{TagId, TagSet, Taxonomy};

/// Distribution parameters for one category's numeric features. Scales are
/// medians; samples spread around them multiplicatively. `None` means the
/// field is absent from the generated records (exercising the imputer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericProfile {
    pub cone_scale: f64,
    pub degree_scale: f64,
    pub address_scale: f64,
    pub users_scale: Option<f64>,
    pub port_scale: Option<f64>,
}

/// A fraction of `primary`'s rows additionally carries `partner` (with
/// partner sub-tags), producing genuinely multi-label examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelRule {
    pub primary: TagId,
    pub partner: TagId,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub per_category: BTreeMap<TagId, usize>,
    /// Tag to name fragment; fragments must not contain each other.
    pub keywords: BTreeMap<TagId, String>,
    pub profiles: BTreeMap<TagId, NumericProfile>,
    pub multi_label: Vec<MultiLabelRule>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A ready-to-use spec covering every top category of `taxonomy` with
    /// `per_category` rows each and 10% multi-label rows pairing each
    /// category with the next one in schema order.
    pub fn default_for(taxonomy: &Taxonomy, per_category: usize, seed: u64) -> Self {
        let tops = taxonomy.top_tags();
        let mut keywords = BTreeMap::new();
        for node in taxonomy.nodes() {
            keywords.insert(node.id.clone(), default_keyword(&node.id));
        }
        let mut profiles = BTreeMap::new();
        for (i, top) in tops.iter().enumerate() {
            profiles.insert(top.clone(), default_profile(top, i));
        }
        let multi_label = tops
            .iter()
            .enumerate()
            .map(|(i, top)| MultiLabelRule {
                primary: top.clone(),
                partner: tops[(i + 1) % tops.len()].clone(),
                fraction: 0.1,
            })
            .collect();
        SyntheticSpec {
            per_category: tops.iter().map(|t| (t.clone(), per_category)).collect(),
            keywords,
            profiles,
            multi_label,
            seed,
        }
    }
}

/// The taxonomy-derived keyword table: what the default spec generates names
/// with and what a bare `--mock` run matches against.
pub fn default_mock_table(taxonomy: &Taxonomy) -> BTreeMap<String, TagId> {
    taxonomy
        .nodes()
        .iter()
        .map(|n| (default_keyword(&n.id).to_lowercase(), n.id.clone()))
        .collect()
}

/// Leaf-derived fragment with overrides where a plain leaf would be a
/// substring of another fragment (which would cross-trigger the mock).
fn default_keyword(tag: &TagId) -> String {
    match tag.as_str() {
        "finance.central_bank" => "centralreserve".to_string(),
        "transportation.transit_authority" => "metroauthority".to_string(),
        _ => tag.leaf().replace('_', ""),
    }
}

fn default_profile(tag: &TagId, index: usize) -> NumericProfile {
    let spread = 1.0 + index as f64 * 0.15;
    match tag.as_str() {
        "transit" => NumericProfile {
            cone_scale: 5_000.0,
            degree_scale: 800.0,
            address_scale: 2e6,
            users_scale: Some(1_000.0),
            port_scale: Some(400_000.0),
        },
        "access" => NumericProfile {
            cone_scale: 40.0,
            degree_scale: 12.0,
            address_scale: 400_000.0,
            users_scale: Some(300_000.0),
            port_scale: Some(20_000.0),
        },
        "mobile" => NumericProfile {
            cone_scale: 15.0,
            degree_scale: 9.0,
            address_scale: 250_000.0,
            users_scale: Some(900_000.0),
            port_scale: Some(30_000.0),
        },
        "ixp" => NumericProfile {
            cone_scale: 1.0,
            degree_scale: 250.0,
            address_scale: 1_000.0,
            users_scale: None,
            port_scale: Some(1_500_000.0),
        },
        "content" => NumericProfile {
            cone_scale: 3.0,
            degree_scale: 150.0,
            address_scale: 120_000.0,
            users_scale: None,
            port_scale: Some(600_000.0),
        },
        "dns" => NumericProfile {
            cone_scale: 1.0,
            degree_scale: 40.0,
            address_scale: 2_000.0,
            users_scale: None,
            port_scale: Some(5_000.0),
        },
        _ => NumericProfile {
            cone_scale: 1.0 * spread,
            degree_scale: 3.0 * spread,
            address_scale: 4_000.0 * spread,
            users_scale: Some(50.0 * spread),
            port_scale: None,
        },
    }
}

const COUNTRY_POOL: [&str; 12] =
    ["US", "BR", "DE", "JP", "AU", "ZA", "FR", "IN", "AR", "GB", "NL", "KR"];

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub corpus: AnnotatedCorpus,
    pub merged: Vec<MergedAsRecord>,
    pub mock_table: BTreeMap<String, TagId>,
}

fn validate_spec(spec: &SyntheticSpec, taxonomy: &Taxonomy) -> Result<(), CorpusError> {
    for (top, &n) in &spec.per_category {
        if n == 0 {
            continue;
        }
        if !spec.keywords.contains_key(top) {
            return Err(CorpusError::SpecIncomplete(top.clone(), "keyword"));
        }
        if !spec.profiles.contains_key(top) {
            return Err(CorpusError::SpecIncomplete(top.clone(), "numeric generator"));
        }
        for sub in taxonomy.subtags_of(top)? {
            if !spec.keywords.contains_key(sub) {
                return Err(CorpusError::SpecIncomplete(sub.clone(), "keyword"));
            }
        }
    }
    Ok(())
}

/// Picks the sub-tags for one row of a category: one member per exclusivity
/// group; for a category whose sub-tags are all ungrouped, exactly one of
/// them; ungrouped sub-tags alongside groups become optional flags.
fn pick_subtags(taxonomy: &Taxonomy, top: &TagId, rng: &mut ChaCha8Rng) -> TagSet {
    let subs = taxonomy.subtags_of(top).expect("validated top tag");
    let mut groups: BTreeMap<&str, Vec<&TagId>> = BTreeMap::new();
    let mut ungrouped: Vec<&TagId> = Vec::new();
    for sub in subs {
        match &taxonomy.node(sub).expect("sub node").exclusivity_group {
            Some(group) => groups.entry(group).or_default().push(sub),
            None => ungrouped.push(sub),
        }
    }
    let mut out = TagSet::new();
    for members in groups.values() {
        out.insert(members[rng.random_range(0..members.len())].clone());
    }
    if groups.is_empty() {
        if !ungrouped.is_empty() {
            out.insert(ungrouped[rng.random_range(0..ungrouped.len())].clone());
        }
    } else {
        for sub in ungrouped {
            if rng.random_bool(0.25) {
                out.insert(sub.clone());
            }
        }
    }
    out
}

fn sample_scale(scale: f64, rng: &mut ChaCha8Rng) -> u64 {
    let factor = (rng.random_range(-0.7..0.7f64)).exp();
    (scale * factor).round().max(0.0) as u64
}

fn title_case(fragment: &str) -> String {
    let mut chars = fragment.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Generates (gold corpus, merged dataset, mock keyword table).
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    taxonomy: &Taxonomy,
) -> Result<SyntheticDataset, CorpusError> {
    validate_spec(spec, taxonomy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut rows = Vec::new();
    let mut merged = Vec::new();
    let mut asn = 100_000u32;

    for top in taxonomy.top_tags() {
        let n = spec.per_category.get(&top).copied().unwrap_or(0);
        if n == 0 {
            continue;
        }
        let rule = spec.multi_label.iter().find(|r| r.primary == top);
        let multi_rows = rule.map_or(0, |r| (r.fraction * n as f64).round() as usize);

        for i in 0..n {
            let mut tags = TagSet::new();
            tags.insert(top.clone());
            for sub in pick_subtags(taxonomy, &top, &mut rng) {
                tags.insert(sub);
            }
            if i < multi_rows {
                let partner = &rule.expect("rule present").partner;
                tags.insert(partner.clone());
                for sub in pick_subtags(taxonomy, partner, &mut rng) {
                    tags.insert(sub);
                }
            }

            // Name carries every tag's keyword, in taxonomy order.
            let fragments: Vec<String> = taxonomy
                .nodes()
                .iter()
                .filter(|node| tags.contains(&node.id))
                .map(|node| title_case(&spec.keywords[&node.id]))
                .collect();
            let name = format!("{} Net {}", fragments.join(" "), i + 1);

            let profile = &spec.profiles[&top];
            let country = COUNTRY_POOL
                [(taxonomy.top_tags().iter().position(|t| *t == top).unwrap_or(0) + i / 12)
                    % COUNTRY_POOL.len()]
            .to_string();
            let slug = spec.keywords[&top].clone();

            let cone_asns = sample_scale(profile.cone_scale, &mut rng);
            let deg_customer = sample_scale(profile.degree_scale, &mut rng);
            let deg_peer = sample_scale(profile.degree_scale * 0.3, &mut rng);
            let deg_provider = rng.random_range(0..4u64);
            let users = profile
                .users_scale
                .map(|s| sample_scale(s, &mut rng))
                .filter(|_| rng.random_range(0..20) != 0);
            let ports = profile.port_scale.map(|s| sample_scale(s, &mut rng));

            merged.push(MergedAsRecord {
                asn,
                as_name: Some(name.clone()),
                org_name: Some(format!("{name} Holdings")),
                as_country: Some(country.clone()),
                org_country: None,
                website: Some(format!("https://www.{slug}{asn}.example")),
                users,
                cone_asns,
                cone_addrs: sample_scale(profile.address_scale, &mut rng),
                cone_prefixes: cone_asns.max(1) * 2,
                deg_total: deg_customer + deg_peer + deg_provider,
                deg_provider,
                deg_customer,
                deg_peer,
                orig_addrs: sample_scale(profile.address_scale * 0.2, &mut rng),
                orig_prefixes: rng.random_range(1..64),
                cone_countries: (0..(cone_asns.min(8) / 2 + 1))
                    .map(|k| COUNTRY_POOL[(k as usize + i) % COUNTRY_POOL.len()].to_string())
                    .collect(),
                facilities: Vec::new(),
                ixp_port_mbps_total: ports,
                traffic_tier: ports.map(|p| {
                    if p > 500_000 { "1 Tbps+".to_string() } else { "10-100 Gbps".to_string() }
                }),
                traffic_asym: None,
                geo_scope: Some(if cone_asns > 1_000 { "Global" } else { "Regional" }.to_string()),
                provenance: FieldProvenance {
                    as_name: Provenance::Ipinfo,
                    org_name: Provenance::Peeringdb,
                    website: Provenance::Ipinfo,
                    as_country: Provenance::Ipinfo,
                    org_country: Provenance::Absent,
                },
            });
            rows.push(CorpusRow { asn, tags, note: "synthetic".into() });
            asn += 1;
        }
    }

    let mock_table: BTreeMap<String, TagId> = spec
        .keywords
        .iter()
        .map(|(tag, keyword)| (keyword.to_lowercase(), tag.clone()))
        .collect();

    Ok(SyntheticDataset {
        corpus: AnnotatedCorpus {
            taxonomy_name: taxonomy.name().to_string(),
            taxonomy_version: taxonomy.version().to_string(),
            rows,
        },
        merged,
        mock_table,
    })
}
