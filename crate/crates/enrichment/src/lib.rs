// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Declared-license lookups against an external license knowledge base.
//!
//! The endpoint shape is configured rather than tied to one provider: a base
//! URL, a path template with `{ecosystem}`, `{name}` and `{version}`
//! placeholders, and a JSON pointer to the license expression in the
//! response. Lookups never fail: a remote error falls back to the on-disk
//! cache, then to the fixture file, then to an empty result with a warning.
//! In offline mode only the fixture file is consulted.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use clearway_core::inventory::{ClearanceState, Clock, Inventory, InventoryError, SystemClock};
use clearway_core::{Coordinates, LicenseExpression};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrichmentConfig {
    pub base_url: Option<String>,
    pub path_template: String,
    /// JSON pointer to the expression string in a response body.
    pub license_pointer: String,
    pub offline: bool,
    pub ttl_days: u64,
    pub timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
    /// JSON object mapping `ecosystem/name/version` to an expression.
    pub fixtures: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            path_template: "/definitions/{ecosystem}/{name}/{version}".into(),
            license_pointer: "/licensed/declared".into(),
            offline: false,
            ttl_days: 7,
            timeout_secs: 5,
            cache_dir: None,
            fixtures: None,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Remote,
    Cache,
    Fixture,
    /// Nothing was found anywhere.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentResult {
    pub coords: Coordinates,
    pub curated_license: Option<LicenseExpression>,
    pub source: Source,
    pub fetched_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    coords: Coordinates,
    license: Option<String>,
    fetched_at: DateTime<Utc>,
}

/// Characters kept verbatim in a path segment.
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

pub struct Enricher {
    config: EnrichmentConfig,
    fixtures: BTreeMap<String, String>,
    setup_warnings: Vec<String>,
    clock: Arc<dyn Clock>,
    agent: ureq::Agent,
    cache_writes: Mutex<()>,
}

impl Enricher {
    pub fn new(config: EnrichmentConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    /// A fixture file that cannot be read becomes a warning on every result.
    pub fn with_clock(config: EnrichmentConfig, clock: Arc<dyn Clock>) -> Self {
        let mut setup_warnings = Vec::new();
        let fixtures = match &config.fixtures {
            None => BTreeMap::new(),
            Some(path) => match load_fixtures(path) {
                Ok(map) => map,
                Err(message) => {
                    setup_warnings.push(message);
                    BTreeMap::new()
                }
            },
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            fixtures,
            setup_warnings,
            clock,
            agent,
            cache_writes: Mutex::new(()),
        }
    }

    pub fn config(&self) -> &EnrichmentConfig {
        &self.config
    }

    pub fn enrich(&self, coords: &Coordinates) -> EnrichmentResult {
        let now = self.clock.now();
        let mut result = EnrichmentResult {
            coords: coords.clone(),
            curated_license: None,
            source: Source::Unavailable,
            fetched_at: now,
            warnings: self.setup_warnings.clone(),
        };

        if !self.config.offline {
            let cached = self.read_cache(coords);
            if let Some(entry) = cached.as_ref().filter(|e| self.is_fresh(e, now)) {
                return self.cached_result(result, entry);
            }
            match self.fetch(coords) {
                Ok(license) => {
                    self.write_cache(coords, license.as_ref(), now, &mut result.warnings);
                    result.curated_license = license;
                    result.source = Source::Remote;
                    return result;
                }
                Err(message) => result.warnings.push(message),
            }
            if let Some(entry) = &cached {
                result.warnings.push(format!("using stale cache entry for {coords}"));
                return self.cached_result(result, entry);
            }
        }

        if let Some(text) = self.fixtures.get(&coords.path_key()) {
            match LicenseExpression::parse(text) {
                Ok(expr) => {
                    result.curated_license = Some(expr);
                    result.source = Source::Fixture;
                    return result;
                }
                Err(e) => result
                    .warnings
                    .push(format!("fixture expression for {coords} is unparseable: {e}")),
            }
        }
        result.warnings.push(format!("no curated license data for {coords}"));
        result
    }

    /// Looks up every coordinate with at most `parallelism` requests in flight.
    /// Results come back in input order.
    pub fn enrich_all(&self, coords: &[Coordinates]) -> Vec<EnrichmentResult> {
        let workers = self.config.parallelism.clamp(1, coords.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<EnrichmentResult>>> = coords.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(c) = coords.get(i) else { break };
                    *slots[i].lock().expect("result slot") = Some(self.enrich(c));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("result slot").expect("every slot filled"))
            .collect()
    }

    fn cached_result(&self, mut result: EnrichmentResult, entry: &CacheEntry) -> EnrichmentResult {
        result.source = Source::Cache;
        result.fetched_at = entry.fetched_at;
        if let Some(text) = &entry.license {
            match LicenseExpression::parse(text) {
                Ok(expr) => result.curated_license = Some(expr),
                Err(e) => result.warnings.push(format!("cached expression is unparseable: {e}")),
            }
        }
        result
    }

    fn is_fresh(&self, entry: &CacheEntry, now: DateTime<Utc>) -> bool {
        let ttl = chrono::Duration::days(self.config.ttl_days as i64);
        entry.fetched_at <= now && now - entry.fetched_at < ttl
    }

    pub fn url_for(&self, coords: &Coordinates) -> Option<String> {
        let base = self.config.base_url.as_deref()?;
        let seg = |s: &str| utf8_percent_encode(s, SEGMENT).to_string();
        let path = self
            .config
            .path_template
            .replace("{ecosystem}", &seg(&coords.ecosystem))
            .replace("{name}", &seg(&coords.name))
            .replace("{version}", &seg(coords.version.as_deref().unwrap_or("")));
        Some(format!("{}{}", base.trim_end_matches('/'), path))
    }

    fn fetch(&self, coords: &Coordinates) -> Result<Option<LicenseExpression>, String> {
        let url = self
            .url_for(coords)
            .ok_or_else(|| "no knowledge base configured".to_string())?;
        let response = self
            .agent
            .get(&url)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| format!("request to {url} failed: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("{url} answered {status}"));
        }
        let mut body = String::new();
        response
            .into_body()
            .into_reader()
            .take(1 << 20)
            .read_to_string(&mut body)
            .map_err(|e| format!("reading {url}: {e}"))?;
        let json: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| format!("{url} returned invalid JSON: {e}"))?;
        match json.pointer(&self.config.license_pointer) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(text)) if matches!(text.as_str(), "NOASSERTION" | "NONE" | "") => Ok(None),
            Some(serde_json::Value::String(text)) => LicenseExpression::parse(text)
                .map(Some)
                .map_err(|e| format!("{url} returned unparseable expression `{text}`: {e}")),
            Some(other) => Err(format!(
                "{url}: expected a string at {}, got {other}",
                self.config.license_pointer
            )),
        }
    }

    fn cache_path(&self, coords: &Coordinates) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        Some(dir.join(format!("{}.json", cache_key(coords))))
    }

    fn read_cache(&self, coords: &Coordinates) -> Option<CacheEntry> {
        let bytes = fs::read(self.cache_path(coords)?).ok()?;
        serde_json::from_slice::<CacheEntry>(&bytes)
            .ok()
            .filter(|e| &e.coords == coords)
    }

    fn write_cache(
        &self,
        coords: &Coordinates,
        license: Option<&LicenseExpression>,
        now: DateTime<Utc>,
        warnings: &mut Vec<String>,
    ) {
        let Some(path) = self.cache_path(coords) else {
            return;
        };
        let entry = CacheEntry {
            coords: coords.clone(),
            license: license.map(ToString::to_string),
            fetched_at: now,
        };
        let _guard = self.cache_writes.lock().expect("cache lock");
        let write = || -> std::io::Result<()> {
            let dir = path.parent().expect("cache file has a parent");
            fs::create_dir_all(dir)?;
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_vec_pretty(&entry)?)?;
            fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            warnings.push(format!("could not write cache {}: {e}", path.display()));
        }
    }
}

/// Hex SHA-256 of the rendered coordinates.
pub fn cache_key(coords: &Coordinates) -> String {
    hex::encode(Sha256::digest(coords.to_string().as_bytes()))
}

fn load_fixtures(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read fixtures {}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("fixtures {} are invalid: {e}", path.display()))
}

/// Stores a curated license as the declared license, but only for releases
/// without one that are still open for review. Returns whether anything
/// changed.
pub fn apply(inventory: &mut Inventory, result: &EnrichmentResult) -> Result<bool, InventoryError> {
    let Some(expr) = &result.curated_license else {
        return Ok(false);
    };
    let Some(release) = inventory.store().find_release(&result.coords) else {
        return Ok(false);
    };
    if matches!(release.state, ClearanceState::Cleared | ClearanceState::Rejected) || release.declared_license.is_some()
    {
        return Ok(false);
    }
    let id = release.id;
    let origin = match result.source {
        Source::Remote => "enrichment:remote",
        Source::Cache => "enrichment:cache",
        Source::Fixture => "enrichment:fixture",
        Source::Unavailable => return Ok(false),
    };
    inventory.set_declared_license(id, expr.clone(), origin)
}
