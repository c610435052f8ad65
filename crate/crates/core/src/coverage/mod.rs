//! WiFi coverage estimation along a trajectory and the oracle policy that
//! turns coverage into NIC activation decisions.
//!
//! Access points come from an [`ApCatalog`]. Each AP covers a disc. Along a
//! trajectory the node stays on one network (an AP group, or the ESSID of an
//! ungrouped AP) for as long as that network covers it, so handovers between
//! APs of the same group do not break an interval. The resulting intervals
//! are classified by duration into the oracle events.

mod geo;

pub use geo::{GeoPoint, EARTH_RADIUS_M};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Radius assumed when a catalog record has none (m).
pub const DEFAULT_RADIUS_M: f64 = 50.0;
/// Coverage duration separating short from long WiFi availability (s).
pub const DEFAULT_THRESHOLD_S: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverageError {
    #[error("catalog unavailable: {0}")]
    CatalogUnavailable(String),
    #[error("invalid access point: {0}")]
    InvalidAccessPoint(String),
    #[error("invalid position ({lat}, {lon})")]
    InvalidPosition { lat: f64, lon: f64 },
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub essid: String,
    pub position: GeoPoint,
    pub radius_m: f64,
    /// Network the AP belongs to, e.g. a campus-wide deployment.
    pub group: Option<String>,
    pub open: bool,
}

impl AccessPoint {
    pub fn new(
        essid: impl Into<String>,
        position: GeoPoint,
        radius_m: Option<f64>,
        group: Option<String>,
        open: bool,
    ) -> Result<Self, CoverageError> {
        let essid = essid.into();
        if !position.is_valid() {
            return Err(CoverageError::InvalidAccessPoint(alloc::format!(
                "{essid}: coordinates ({}, {}) out of range",
                position.lat,
                position.lon
            )));
        }
        let radius_m = radius_m.unwrap_or(DEFAULT_RADIUS_M);
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(CoverageError::InvalidAccessPoint(alloc::format!(
                "{essid}: radius must be positive, got {radius_m}"
            )));
        }
        Ok(AccessPoint {
            essid,
            position,
            radius_m,
            group: group.filter(|g| !g.is_empty()),
            open,
        })
    }

    /// The network the node stays attached to while moving between APs.
    pub fn network(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.essid)
    }

    pub fn covers(&self, p: &GeoPoint) -> bool {
        self.position.distance(p) <= self.radius_m
    }
}

/// A source of access points.
pub trait ApCatalog {
    /// Every AP within `radius_m` of `center`.
    fn query(&self, center: &GeoPoint, radius_m: f64) -> Result<Vec<AccessPoint>, CoverageError>;
}

/// Catalog held in memory, e.g. loaded from a fixture file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureCatalog {
    pub aps: Vec<AccessPoint>,
}

impl FixtureCatalog {
    pub fn new(aps: Vec<AccessPoint>) -> Self {
        FixtureCatalog { aps }
    }
}

impl ApCatalog for FixtureCatalog {
    fn query(&self, center: &GeoPoint, radius_m: f64) -> Result<Vec<AccessPoint>, CoverageError> {
        Ok(self
            .aps
            .iter()
            .filter(|ap| ap.position.distance(center) <= radius_m)
            .cloned()
            .collect())
    }
}

/// Validated catalog lookup around `center`.
pub fn query_aps(catalog: &dyn ApCatalog, center: &GeoPoint, radius_m: f64) -> Result<Vec<AccessPoint>, CoverageError> {
    if !center.is_valid() {
        return Err(CoverageError::InvalidPosition {
            lat: center.lat,
            lon: center.lon,
        });
    }
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(CoverageError::InvalidRadius(radius_m));
    }
    catalog.query(center, radius_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds.
    pub t: f64,
    pub position: GeoPoint,
    /// m/s, if the source reports it.
    pub speed: Option<f64>,
}

impl TrajectorySample {
    pub fn new(t: f64, lat: f64, lon: f64) -> Self {
        TrajectorySample {
            t,
            position: GeoPoint::new(lat, lon),
            speed: None,
        }
    }
}

/// Samples with strictly increasing timestamps and valid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self, CoverageError> {
        for (i, s) in samples.iter().enumerate() {
            if !s.position.is_valid() || !s.t.is_finite() {
                return Err(CoverageError::InvalidTrajectory(alloc::format!(
                    "sample {i}: invalid time or position"
                )));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(CoverageError::InvalidTrajectory(alloc::format!(
                    "sample {i}: timestamp {} does not increase",
                    s.t
                )));
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Position at time `t`. Inside the sampled span positions are
    /// interpolated; past the last sample they are extrapolated linearly from
    /// the last two samples.
    pub fn position_at(&self, t: f64) -> Option<GeoPoint> {
        let s = &self.samples;
        match s.len() {
            0 => None,
            1 => Some(s[0].position),
            n => {
                let k = s.partition_point(|x| x.t <= t).clamp(1, n - 1);
                let (a, b) = (&s[k - 1], &s[k]);
                Some(a.position.lerp(&b.position, (t - a.t) / (b.t - a.t)))
            }
        }
    }

    /// Extends the trajectory `horizon` seconds past its end with samples
    /// every `step` seconds on the line through the last two samples.
    pub fn extrapolate(&self, horizon: f64, step: f64) -> Result<Trajectory, CoverageError> {
        if self.samples.len() < 2 {
            return Err(CoverageError::InvalidTrajectory(
                "extrapolation needs two samples".into(),
            ));
        }
        if !(step > 0.0) || !(horizon >= 0.0) {
            return Err(CoverageError::InvalidTrajectory(
                "horizon and step must be positive".into(),
            ));
        }
        let mut out = self.samples.clone();
        let end = self.end().expect("non-empty");
        let mut k = 1.0;
        while k * step <= horizon + 1e-9 {
            let t = end + k * step;
            let p = self.position_at(t).expect("non-empty");
            out.push(TrajectorySample {
                t,
                position: p,
                speed: None,
            });
            k += 1.0;
        }
        Trajectory::new(out)
    }
}

/// A maximal span of time with constant coverage status.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageInterval {
    pub start: f64,
    pub end: f64,
    /// Serving network, `None` when uncovered.
    pub network: Option<String>,
    /// ESSIDs of the serving network's APs seen during the interval.
    pub essids: Vec<String>,
}

impl CoverageInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn covered(&self) -> bool {
        self.network.is_some()
    }
}

/// Intervals partitioning a trajectory's time span, in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timeline {
    pub intervals: Vec<CoverageInterval>,
}

const MERGE_EPS: f64 = 1e-9;

/// Time spans during which each network covers the trajectory, with the
/// ESSIDs involved.
fn network_spans(traj: &Trajectory, aps: &[AccessPoint]) -> BTreeMap<String, Vec<(f64, f64, Vec<String>)>> {
    let mut raw: BTreeMap<String, Vec<(f64, f64, String)>> = BTreeMap::new();
    let s = traj.samples();
    for ap in aps {
        for w in s.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if let Some((s0, s1)) = geo::disc_chord(&a.position, &b.position, &ap.position, ap.radius_m) {
                let dt = b.t - a.t;
                raw.entry(ap.network().into())
                    .or_default()
                    .push((a.t + s0 * dt, a.t + s1 * dt, ap.essid.clone()));
            }
        }
    }
    let mut out = BTreeMap::new();
    for (net, mut spans) in raw {
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64, Vec<String>)> = Vec::new();
        for (a, b, essid) in spans {
            match merged.last_mut() {
                Some(last) if a <= last.1 + MERGE_EPS => {
                    last.1 = last.1.max(b);
                    if !last.2.contains(&essid) {
                        last.2.push(essid);
                    }
                }
                _ => merged.push((a, b, alloc::vec![essid])),
            }
        }
        out.insert(net, merged);
    }
    out
}

/// Splits the trajectory's time span into covered and uncovered intervals.
///
/// Positions between samples are interpolated linearly. When several
/// networks cover the node it keeps the one it is on; on entering coverage
/// it picks the network that covers it longest.
pub fn predict_coverage(traj: &Trajectory, aps: &[AccessPoint]) -> Result<Timeline, CoverageError> {
    if traj.len() < 2 {
        return Err(CoverageError::InvalidTrajectory(
            "at least two samples are required".into(),
        ));
    }
    let (t0, t1) = (traj.start().expect("non-empty"), traj.end().expect("non-empty"));
    let spans = network_spans(traj, aps);
    let mut intervals: Vec<CoverageInterval> = Vec::new();
    let mut t = t0;
    while t < t1 {
        // networks covering t, with the end of their current span
        let mut best: Option<(&String, &(f64, f64, Vec<String>))> = None;
        let mut next_start = t1;
        for (net, list) in &spans {
            for span in list {
                if span.0 <= t + MERGE_EPS && span.1 > t + MERGE_EPS {
                    if best.is_none_or(|(_, b)| span.1 > b.1) {
                        best = Some((net, span));
                    }
                } else if span.0 > t && span.0 < next_start {
                    next_start = span.0;
                }
            }
        }
        let interval = match best {
            Some((net, span)) => CoverageInterval {
                start: t,
                end: span.1.min(t1),
                network: Some(net.clone()),
                essids: span.2.clone(),
            },
            None => CoverageInterval {
                start: t,
                end: next_start,
                network: None,
                essids: Vec::new(),
            },
        };
        t = interval.end;
        match intervals.last_mut() {
            // an uncovered gap shorter than the merge tolerance never splits
            Some(last) if last.network == interval.network && last.network.is_none() => last.end = interval.end,
            _ => intervals.push(interval),
        }
    }
    Ok(Timeline { intervals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    NoWifi,
    ShortWifi,
    LongWifi,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::NoWifi => "EV_NO_WIFI",
            EventKind::ShortWifi => "EV_SHORT_WIFI",
            EventKind::LongWifi => "EV_LONG_WIFI",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageEvent {
    pub timestamp: f64,
    pub kind: EventKind,
    /// Predicted coverage duration; `None` for [`EventKind::NoWifi`].
    pub duration: Option<f64>,
    pub essids: Vec<String>,
}

/// One event per interval: no WiFi when uncovered, long WiFi when covered
/// for at least `threshold` seconds, short WiFi otherwise.
pub fn classify(timeline: &Timeline, threshold: f64) -> Result<Vec<CoverageEvent>, CoverageError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(CoverageError::InvalidThreshold(threshold));
    }
    Ok(timeline
        .intervals
        .iter()
        .map(|iv| {
            let kind = match iv.covered() {
                false => EventKind::NoWifi,
                true if iv.duration() >= threshold => EventKind::LongWifi,
                true => EventKind::ShortWifi,
            };
            CoverageEvent {
                timestamp: iv.start,
                kind,
                duration: iv.covered().then(|| iv.duration()),
                essids: iv.essids.clone(),
            }
        })
        .collect())
}

/// NIC activation flags decided by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NicFlags {
    pub active_wifi: bool,
    pub active_umts: bool,
}

pub fn apply_policy(kind: EventKind) -> NicFlags {
    let (active_wifi, active_umts) = match kind {
        EventKind::NoWifi => (false, true),
        EventKind::ShortWifi => (true, true),
        EventKind::LongWifi => (true, false),
    };
    NicFlags {
        active_wifi,
        active_umts,
    }
}

/// Event used when the catalog cannot be reached: both NICs stay on.
pub fn fallback_event(timestamp: f64) -> CoverageEvent {
    CoverageEvent {
        timestamp,
        kind: EventKind::ShortWifi,
        duration: None,
        essids: Vec::new(),
    }
}

/// Queries `catalog` around each sample and predicts coverage over the whole
/// trajectory. `search_radius_m` should exceed the largest AP radius.
pub fn coverage_from_catalog(
    traj: &Trajectory,
    catalog: &dyn ApCatalog,
    search_radius_m: f64,
) -> Result<Timeline, CoverageError> {
    let mut aps: Vec<AccessPoint> = Vec::new();
    for s in traj.samples() {
        for ap in query_aps(catalog, &s.position, search_radius_m)? {
            if !aps.contains(&ap) {
                aps.push(ap);
            }
        }
    }
    predict_coverage(traj, &aps)
}

/// Oracle decision at the end of the observed trajectory: extrapolates the
/// motion `horizon` seconds ahead, predicts coverage, and classifies the
/// interval the node is in now. A catalog failure degrades to
/// [`fallback_event`].
pub fn forecast(
    observed: &Trajectory,
    catalog: &dyn ApCatalog,
    horizon: f64,
    step: f64,
    search_radius_m: f64,
    threshold: f64,
) -> Result<CoverageEvent, CoverageError> {
    let now = observed
        .end()
        .ok_or_else(|| CoverageError::InvalidTrajectory("empty trajectory".into()))?;
    let future = observed.extrapolate(horizon, step)?;
    // only the future part matters for the decision
    let ahead: Vec<TrajectorySample> = future.samples().iter().filter(|s| s.t >= now).copied().collect();
    let ahead = Trajectory::new(ahead)?;
    let timeline = match coverage_from_catalog(&ahead, catalog, search_radius_m) {
        Ok(t) => t,
        Err(CoverageError::CatalogUnavailable(_)) => return Ok(fallback_event(now)),
        Err(e) => return Err(e),
    };
    let events = classify(&timeline, threshold)?;
    Ok(events.into_iter().next().expect("non-empty span has an interval"))
}
