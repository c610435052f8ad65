//! Access-point catalogs: fixture files, a remote HTTP catalog and a TTL
//! cache.
//!
//! Fixture files are CSV with the columns `essid,lat,lon,radius_m,group,open`.
//! A header line is optional and `#` starts a comment line. Empty `radius_m`
//! means the default 50 m disc, empty `group` means the AP is its own
//! network, and `open` is `true`/`false` (also `1`/`0`, `yes`/`no`; empty
//! means open). Malformed rows are skipped and counted.
//!
//! The remote catalog answers `GET <url>?lat=..&lon=..&radius=..` with a JSON
//! array of records with the same fields, or an object holding the array
//! under `results`. A bearer token is read from `ABPS_CATALOG_TOKEN`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use abps_core::coverage::{AccessPoint, ApCatalog, CoverageError, FixtureCatalog, GeoPoint};
use serde::Deserialize;

use crate::error::InputError;

pub const TOKEN_ENV: &str = "ABPS_CATALOG_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    /// 1-based line in the fixture file, or the index in a remote response.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureLoad {
    pub catalog: FixtureCatalog,
    pub skipped: Vec<SkippedRecord>,
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("invalid open flag '{other}'")),
    }
}

fn fixture_record(fields: &[&str]) -> Result<AccessPoint, String> {
    if !(3..=6).contains(&fields.len()) {
        return Err(format!("expected 3 to 6 fields, got {}", fields.len()));
    }
    let get = |i: usize| fields.get(i).copied().unwrap_or("");
    let num = |i: usize, name: &str| {
        get(i)
            .parse::<f64>()
            .map_err(|_| format!("invalid {name} '{}'", get(i)))
    };
    let radius = match get(3) {
        "" => None,
        _ => Some(num(3, "radius_m")?),
    };
    let group = Some(get(4)).filter(|g| !g.is_empty()).map(str::to_string);
    AccessPoint::new(
        get(0),
        GeoPoint::new(num(1, "lat")?, num(2, "lon")?),
        radius,
        group,
        parse_bool(get(5))?,
    )
    .map_err(|e| e.to_string())
}

/// Parses a fixture. Never fails: bad rows end up in `skipped`.
pub fn parse_fixture(text: &str) -> FixtureLoad {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut aps = Vec::new();
    let mut skipped = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                skipped.push(SkippedRecord {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = rec.iter().collect();
        if std::mem::take(&mut first) && fields.get(1).is_some_and(|f| f.eq_ignore_ascii_case("lat")) {
            continue;
        }
        match fixture_record(&fields) {
            Ok(ap) => aps.push(ap),
            Err(reason) => skipped.push(SkippedRecord { line, reason }),
        }
    }
    for s in &skipped {
        log::warn!("catalog line {}: skipped ({})", s.line, s.reason);
    }
    FixtureLoad {
        catalog: FixtureCatalog::new(aps),
        skipped,
    }
}

pub fn load_fixture(path: &Path) -> Result<FixtureLoad, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    Ok(parse_fixture(&text))
}

fn default_open() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct RemoteRecord {
    essid: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    radius_m: Option<f64>,
    #[serde(default)]
    group: Option<String>,
    #[serde(default = "default_open")]
    open: bool,
}

/// Decodes a remote response body into APs and skipped records.
pub fn parse_remote_body(body: &str) -> Result<(Vec<AccessPoint>, Vec<SkippedRecord>), CoverageError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| CoverageError::CatalogUnavailable(format!("bad response: {e}")))?;
    let items = match value {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(mut o) => match o.remove("results") {
            Some(serde_json::Value::Array(a)) => a,
            _ => {
                return Err(CoverageError::CatalogUnavailable(
                    "response has no results array".into(),
                ))
            }
        },
        _ => return Err(CoverageError::CatalogUnavailable("unexpected response shape".into())),
    };
    let mut aps = Vec::new();
    let mut skipped = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let ap = serde_json::from_value::<RemoteRecord>(item)
            .map_err(|e| e.to_string())
            .and_then(|r| {
                let group = r.group.filter(|g| !g.is_empty());
                AccessPoint::new(r.essid, GeoPoint::new(r.lat, r.lon), r.radius_m, group, r.open)
                    .map_err(|e| e.to_string())
            });
        match ap {
            Ok(ap) => aps.push(ap),
            Err(reason) => {
                log::warn!("catalog record {i}: skipped ({reason})");
                skipped.push(SkippedRecord { line: i, reason });
            }
        }
    }
    Ok((aps, skipped))
}

/// HTTP catalog client. Every call is bounded by the agent's timeout.
pub struct RemoteCatalog {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
    skipped: AtomicUsize,
}

impl RemoteCatalog {
    /// Client for `url`; the token comes from [`TOKEN_ENV`] if set.
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteCatalog {
            agent,
            url: url.into(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            skipped: AtomicUsize::new(0),
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    /// Malformed records skipped so far.
    pub fn skipped(&self) -> usize {
        self.skipped.load(Ordering::Relaxed)
    }
}

impl ApCatalog for RemoteCatalog {
    fn query(&self, center: &GeoPoint, radius_m: f64) -> Result<Vec<AccessPoint>, CoverageError> {
        let mut req = self
            .agent
            .get(&self.url)
            .query("lat", center.lat.to_string())
            .query("lon", center.lon.to_string())
            .query("radius", radius_m.to_string());
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let body = req
            .call()
            .and_then(|mut r| r.body_mut().read_to_string())
            .map_err(|e| CoverageError::CatalogUnavailable(e.to_string()))?;
        let (aps, skipped) = parse_remote_body(&body)?;
        self.skipped.fetch_add(skipped.len(), Ordering::Relaxed);
        // the service may answer with a coarser area than asked for
        Ok(aps
            .into_iter()
            .filter(|ap| ap.position.distance(center) <= radius_m)
            .collect())
    }
}

type CacheKey = (i64, i64, i64);

/// Caches successful lookups of `inner` for `ttl`. Keys are positions
/// rounded to 1e-6 degrees and radii rounded to millimeters. Errors are
/// not cached.
pub struct CachedCatalog<C> {
    inner: C,
    ttl: Duration,
    entries: Mutex<HashMap<CacheKey, (Instant, Vec<AccessPoint>)>>,
}

impl<C: ApCatalog> CachedCatalog<C> {
    pub fn new(inner: C, ttl: Duration) -> Self {
        CachedCatalog {
            inner,
            ttl,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    fn key(center: &GeoPoint, radius_m: f64) -> CacheKey {
        (
            (center.lat * 1e6).round() as i64,
            (center.lon * 1e6).round() as i64,
            (radius_m * 1e3).round() as i64,
        )
    }
}

impl<C: ApCatalog> ApCatalog for CachedCatalog<C> {
    fn query(&self, center: &GeoPoint, radius_m: f64) -> Result<Vec<AccessPoint>, CoverageError> {
        let key = Self::key(center, radius_m);
        {
            let mut entries = self.entries.lock().expect("cache lock");
            match entries.get(&key) {
                Some((at, aps)) if at.elapsed() < self.ttl => return Ok(aps.clone()),
                Some(_) => {
                    entries.remove(&key);
                }
                None => {}
            }
        }
        // the lock is not held across the remote call
        let aps = self.inner.query(center, radius_m)?;
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, (Instant::now(), aps.clone()));
        Ok(aps)
    }
}
