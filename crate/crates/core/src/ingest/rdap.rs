//! RDAP autnum lookups with an on-disk cache.
//!
//! Responses are cached per ASN (including definitive 404s) so warm-cache runs
//! make zero network calls. Transient HTTP failures after the retry budget
//! yield an absent record rather than failing the pipeline; only a response
//! that arrives but does not parse is an error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{non_empty, IngestError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdapRecord {
    pub asn: u32,
    pub org_name: Option<String>,
    pub country: Option<String>,
    pub contact_emails: Vec<String>,
}

/// Source of registry records during a merge. Implementations must be safe to
/// call from multiple worker threads.
pub trait RdapLookup: Sync {
    fn lookup(&self, asn: u32) -> Option<RdapRecord>;
}

impl<T: RdapLookup + ?Sized> RdapLookup for &T {
    fn lookup(&self, asn: u32) -> Option<RdapRecord> {
        (**self).lookup(asn)
    }
}

/// Lookup that never returns anything; used when RDAP is disabled.
pub struct NoRdap;

impl RdapLookup for NoRdap {
    fn lookup(&self, _asn: u32) -> Option<RdapRecord> {
        None
    }
}

impl RdapLookup for BTreeMap<u32, RdapRecord> {
    fn lookup(&self, asn: u32) -> Option<RdapRecord> {
        self.get(&asn).cloned()
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    found: bool,
    record: Option<RdapRecord>,
}

pub struct RdapClient {
    endpoint: String,
    cache_dir: PathBuf,
    retries: u32,
    agent: ureq::Agent,
    cache_lock: Mutex<()>,
}

impl RdapClient {
    pub fn new(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self::with_settings(endpoint, cache_dir, 2, Duration::from_secs(10))
    }

    pub fn with_settings(
        endpoint: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
        retries: u32,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RdapClient {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
            retries,
            agent,
            cache_lock: Mutex::new(()),
        }
    }

    fn cache_path(&self, asn: u32) -> PathBuf {
        self.cache_dir.join(format!("{asn}.json"))
    }

    fn read_cache(&self, asn: u32) -> Option<CacheEntry> {
        let text = std::fs::read_to_string(self.cache_path(asn)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn write_cache(&self, asn: u32, entry: &CacheEntry) -> Result<(), IngestError> {
        let _guard = self.cache_lock.lock().expect("cache lock");
        std::fs::create_dir_all(&self.cache_dir)?;
        let tmp = self.cache_dir.join(format!("{asn}.json.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(entry).expect("cache entry serializes"))?;
        std::fs::rename(&tmp, self.cache_path(asn))?;
        Ok(())
    }

    /// Registry record for `asn`. `Ok(None)` means definitively absent (404)
    /// or unreachable after the retry budget; both are non-fatal.
    pub fn fetch(&self, asn: u32) -> Result<Option<RdapRecord>, IngestError> {
        if let Some(entry) = self.read_cache(asn) {
            return Ok(entry.record);
        }
        let url = format!("{}/autnum/{asn}", self.endpoint.trim_end_matches('/'));
        let mut attempts = 0;
        loop {
            match self.agent.get(&url).call() {
                Ok(mut response) => {
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| IngestError::Http(e.to_string()))?;
                    let record = parse_rdap_autnum(asn, &text)?;
                    self.write_cache(asn, &CacheEntry { found: true, record: Some(record.clone()) })?;
                    return Ok(Some(record));
                }
                Err(ureq::Error::StatusCode(404)) => {
                    self.write_cache(asn, &CacheEntry { found: false, record: None })?;
                    return Ok(None);
                }
                Err(_) if attempts < self.retries => {
                    attempts += 1;
                }
                Err(_) => return Ok(None),
            }
        }
    }
}

impl RdapClient {
    /// Warms the cache for many ASNs with bounded parallelism. Failures are
    /// ignored here; the later per-ASN lookup simply comes back absent.
    pub fn prefetch(&self, asns: &[u32], parallelism: usize) {
        let parallelism = parallelism.max(1);
        for chunk in asns.chunks(parallelism) {
            std::thread::scope(|scope| {
                for &asn in chunk {
                    scope.spawn(move || {
                        let _ = self.fetch(asn);
                    });
                }
            });
        }
    }
}

impl RdapLookup for RdapClient {
    fn lookup(&self, asn: u32) -> Option<RdapRecord> {
        self.fetch(asn).ok().flatten()
    }
}

/// Parses an RDAP autnum response body. The org name comes from the registrant
/// entity's vcard `fn`, falling back to any entity, then the top-level `name`.
pub fn parse_rdap_autnum(asn: u32, body: &str) -> Result<RdapRecord, IngestError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| IngestError::RdapParse { asn, reason: e.to_string() })?;
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::RdapParse { asn, reason: "not a JSON object".into() })?;

    let mut registrant_name = None;
    let mut any_name = None;
    let mut emails = Vec::new();
    if let Some(entities) = obj.get("entities").and_then(Value::as_array) {
        for entity in entities {
            let roles: Vec<&str> = entity
                .get("roles")
                .and_then(Value::as_array)
                .map(|r| r.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            let properties = entity
                .get("vcardArray")
                .and_then(Value::as_array)
                .and_then(|v| v.get(1))
                .and_then(Value::as_array);
            let Some(properties) = properties else { continue };
            for property in properties {
                let Some(parts) = property.as_array() else { continue };
                let key = parts.first().and_then(Value::as_str).unwrap_or_default();
                let text = parts.get(3).and_then(Value::as_str);
                match (key, text) {
                    ("fn", Some(name)) if !name.is_empty() => {
                        if roles.contains(&"registrant") && registrant_name.is_none() {
                            registrant_name = Some(name.to_string());
                        }
                        if any_name.is_none() {
                            any_name = Some(name.to_string());
                        }
                    }
                    ("email", Some(email)) if !email.is_empty() => {
                        emails.push(email.to_string());
                    }
                    _ => {}
                }
            }
        }
    }
    let top_name = obj.get("name").and_then(Value::as_str).map(str::to_string);

    Ok(RdapRecord {
        asn,
        org_name: registrant_name.or(any_name).or_else(|| non_empty(top_name)),
        country: non_empty(obj.get("country").and_then(Value::as_str).map(str::to_string)),
        contact_emails: emails,
    })
}
