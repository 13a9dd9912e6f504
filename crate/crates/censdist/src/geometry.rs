//! Locations, locales, distance metrics, and censored-event intervals.
//!
//! A censored transportation event is an (origin locale, destination locale)
//! pair. Sampling points along both boundaries and taking the minimum and
//! maximum pairwise distance yields an interval guaranteed to bracket the
//! event's true distance; those intervals feed the survival estimator.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// IUGG mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default boundary discretization density (points per polygon edge).
pub const DEFAULT_SAMPLES_PER_EDGE: usize = 16;

/// A precise geographic point. For the haversine metric `x` is longitude in
/// degrees and `y` is latitude in degrees; for the euclidean metric the
/// coordinates are planar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Distance function between two locations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMetric {
    /// Planar L2 distance.
    Euclidean,
    /// Great-circle distance on a sphere of the given radius. Coordinates
    /// are degrees (x = longitude, y = latitude); distances come out in the
    /// radius unit.
    Haversine { earth_radius: f64 },
}

impl DistanceMetric {
    /// Haversine metric with the IUGG mean Earth radius.
    pub fn haversine() -> Self {
        DistanceMetric::Haversine {
            earth_radius: EARTH_RADIUS_KM,
        }
    }

    /// Distance between two locations, validating the metric domain.
    pub fn distance(&self, a: &Location, b: &Location) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Checks that a location lies in this metric's domain.
    pub fn validate(&self, p: &Location) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        if let DistanceMetric::Haversine { .. } = self {
            if !(-180.0..=180.0).contains(&p.x) || !(-90.0..=90.0).contains(&p.y) {
                return Err(Error::CoordinateDomain { x: p.x, y: p.y });
            }
        }
        Ok(())
    }

    pub(crate) fn distance_unchecked(&self, a: &Location, b: &Location) -> f64 {
        match *self {
            DistanceMetric::Euclidean => euclidean(a, b),
            DistanceMetric::Haversine { earth_radius } => haversine(a, b, earth_radius),
        }
    }
}

/// Planar L2 distance.
pub fn euclidean(a: &Location, b: &Location) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn haversine(a: &Location, b: &Location, radius: f64) -> f64 {
    let lat1 = a.y.to_radians();
    let lat2 = b.y.to_radians();
    let dlat = (b.y - a.y).to_radians();
    let dlon = (b.x - a.x).to_radians();
    let s1 = (dlat / 2.0).sin();
    let s2 = (dlon / 2.0).sin();
    let h = s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2;
    2.0 * radius * h.sqrt().min(1.0).asin()
}

/// A censored representation of a location: an administrative region with a
/// simple polygon boundary.
///
/// The boundary ring is closed implicitly (the first vertex is not repeated);
/// a repeated closing vertex in the input is dropped. Construction validates
/// that the polygon has at least three vertices, finite coordinates, no
/// zero-length edges, and no self-intersections.
#[derive(Debug, Clone, PartialEq)]
pub struct Locale {
    id: String,
    boundary: Vec<Location>,
}

impl Locale {
    pub fn new(id: impl Into<String>, mut boundary: Vec<Location>) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: &str| Error::InvalidLocale {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if boundary.len() > 1 && boundary.first() == boundary.last() {
            boundary.pop();
        }
        if boundary.len() < 3 {
            return Err(invalid("polygon needs at least 3 distinct vertices"));
        }
        if boundary.iter().any(|p| !p.is_finite()) {
            return Err(invalid("polygon has a non-finite vertex"));
        }
        let n = boundary.len();
        for i in 0..n {
            if boundary[i] == boundary[(i + 1) % n] {
                return Err(invalid("polygon has a zero-length edge"));
            }
        }
        if !ring_is_simple(&boundary) {
            return Err(invalid("polygon is self-intersecting"));
        }
        Ok(Locale { id, boundary })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(id: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Locale::new(
            id,
            vec![
                Location::new(x0, y0),
                Location::new(x1, y0),
                Location::new(x1, y1),
                Location::new(x0, y1),
            ],
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The boundary ring, without a repeated closing vertex.
    pub fn boundary(&self) -> &[Location] {
        &self.boundary
    }
}

/// Locale lookup by id. A `BTreeMap` keeps exports deterministic.
pub type LocaleMap = BTreeMap<String, Locale>;

fn cross(a: Location, b: Location, c: Location) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Location, b: Location, p: Location) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (endpoints count).
fn segments_intersect(p1: Location, p2: Location, q1: Location, q2: Location) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Simplicity check for an implicit-closure ring: non-adjacent edges must not
/// intersect at all; adjacent edges may meet only at their shared vertex
/// (collinear straight-through vertices are allowed, doubling back is not).
fn ring_is_simple(ring: &[Location]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            let adjacent_tail = j == i + 1;
            let adjacent_wrap = i == 0 && j == n - 1;
            if adjacent_tail || adjacent_wrap {
                if n == 2 {
                    return false;
                }
                let (shared, other_a, other_b) = if adjacent_tail {
                    (a2, a1, b2)
                } else {
                    (a1, a2, b1)
                };
                let va = Location::new(other_a.x - shared.x, other_a.y - shared.y);
                let vb = Location::new(other_b.x - shared.x, other_b.y - shared.y);
                if cross(shared, other_a, other_b) == 0.0 && va.x * vb.x + va.y * vb.y > 0.0 {
                    return false;
                }
            } else if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// An interval `[lower, upper]` known to contain one event's true distance,
/// carrying a positive multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceInterval {
    pub lower: f64,
    pub upper: f64,
    pub weight: f64,
}

impl DistanceInterval {
    /// Unit-weight interval; requires `0 <= lower <= upper < inf`.
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        DistanceInterval::weighted(lower, upper, 1.0)
    }

    pub fn weighted(lower: f64, upper: f64, weight: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower >= 0.0 && lower <= upper) {
            return Err(Error::InvalidInput(format!(
                "invalid interval [{lower}, {upper}]: need 0 <= lower <= upper < inf"
            )));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid interval weight {weight}: must be positive and finite"
            )));
        }
        Ok(DistanceInterval {
            lower,
            upper,
            weight,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// One censored transportation event: an origin/destination locale pair with
/// a multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredEvent {
    pub origin_id: String,
    pub dest_id: String,
    pub count: f64,
}

impl CensoredEvent {
    pub fn new(origin_id: impl Into<String>, dest_id: impl Into<String>, count: f64) -> Self {
        CensoredEvent {
            origin_id: origin_id.into(),
            dest_id: dest_id.into(),
            count,
        }
    }
}

/// A multiset of censored events for one event type, resolved to distance
/// intervals.
#[derive(Debug, Clone)]
pub struct EventCollection {
    intervals: Vec<DistanceInterval>,
}

impl EventCollection {
    /// Wraps precomputed intervals.
    pub fn from_intervals(intervals: Vec<DistanceInterval>) -> Self {
        EventCollection { intervals }
    }

    /// Resolves censored events against a locale map.
    pub fn from_events(
        events: &[CensoredEvent],
        locales: &LocaleMap,
        metric: DistanceMetric,
        samples_per_edge: usize,
    ) -> Result<Self> {
        Ok(EventCollection {
            intervals: intervals_from_events(events, locales, metric, samples_per_edge)?,
        })
    }

    pub fn intervals(&self) -> &[DistanceInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total observation weight.
    pub fn n_observations(&self) -> f64 {
        self.intervals.iter().map(|i| i.weight).sum()
    }
}

/// Points along a locale's boundary: all polygon vertices plus
/// `samples_per_edge - 1` equally spaced interior points per edge. Vertices
/// come first in ring order, then edge interiors in edge order.
pub fn boundary_points(locale: &Locale, samples_per_edge: usize) -> Vec<Location> {
    let spe = samples_per_edge.max(1);
    let ring = locale.boundary();
    let n = ring.len();
    let mut points = Vec::with_capacity(n * spe);
    points.extend_from_slice(ring);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        for k in 1..spe {
            let t = k as f64 / spe as f64;
            points.push(Location::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    points
}

/// Distance interval for one censored event.
///
/// `lower`/`upper` are the min/max distance over all origin-boundary x
/// dest-boundary point pairs. When origin and destination share an id the
/// event stays within one locale, so `lower` is 0 and `upper` is the locale's
/// discretized diameter.
pub fn event_interval(
    origin: &Locale,
    dest: &Locale,
    metric: DistanceMetric,
    samples_per_edge: usize,
) -> Result<DistanceInterval> {
    let origin_pts = boundary_points(origin, samples_per_edge);
    for p in &origin_pts {
        metric.validate(p)?;
    }
    if origin.id() == dest.id() {
        let mut max = 0.0f64;
        for i in 0..origin_pts.len() {
            for j in (i + 1)..origin_pts.len() {
                max = max.max(metric.distance_unchecked(&origin_pts[i], &origin_pts[j]));
            }
        }
        return DistanceInterval::new(0.0, max);
    }
    let dest_pts = boundary_points(dest, samples_per_edge);
    for p in &dest_pts {
        metric.validate(p)?;
    }
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for a in &origin_pts {
        for b in &dest_pts {
            let d = metric.distance_unchecked(a, b);
            if d < min {
                min = d;
            }
            if d > max {
                max = d;
            }
        }
    }
    DistanceInterval::new(min, max)
}

/// Resolves a batch of censored events to weighted intervals.
///
/// Emits one interval per distinct (origin, dest) pair, in order of first
/// appearance, with the pair's counts summed; per-pair geometry is computed
/// once and in parallel. Output order does not depend on thread count.
pub fn intervals_from_events(
    events: &[CensoredEvent],
    locales: &LocaleMap,
    metric: DistanceMetric,
    samples_per_edge: usize,
) -> Result<Vec<DistanceInterval>> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut weights: HashMap<(&str, &str), f64> = HashMap::new();
    for event in events {
        if !locales.contains_key(&event.origin_id) {
            return Err(Error::UnknownLocale(event.origin_id.clone()));
        }
        if !locales.contains_key(&event.dest_id) {
            return Err(Error::UnknownLocale(event.dest_id.clone()));
        }
        if !(event.count.is_finite() && event.count > 0.0) {
            return Err(Error::InvalidInput(format!(
                "event {} -> {} has non-positive count {}",
                event.origin_id, event.dest_id, event.count
            )));
        }
        let key = (event.origin_id.as_str(), event.dest_id.as_str());
        match weights.get_mut(&key) {
            Some(w) => *w += event.count,
            None => {
                weights.insert(key, event.count);
                order.push(key);
            }
        }
    }
    order
        .par_iter()
        .map(|&(origin_id, dest_id)| {
            let interval = event_interval(
                &locales[origin_id],
                &locales[dest_id],
                metric,
                samples_per_edge,
            )?;
            DistanceInterval::weighted(
                interval.lower,
                interval.upper,
                weights[&(origin_id, dest_id)],
            )
        })
        .collect()
}
