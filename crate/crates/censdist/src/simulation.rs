//! Synthetic validation environment: a planar grid of rectangular locales
//! with uniformly placed locations and inverse-distance-policy trips.
//!
//! Destinations are chosen with probability proportional to
//! `1 / (1 + f(x, y_i))` over candidate locations `y_i != x`, so short trips
//! are common and long ones rare. Mapping each event's endpoints back to
//! their containing rectangles yields paired censored/uncensored
//! realizations of the same trip set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    euclidean, CensoredEvent, EventCollection, Locale, LocaleMap, Location,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default grid extent on each axis.
pub const DEFAULT_GRID_EXTENT: f64 = 1_000_000.0;

/// Largest accepted locale-grid aspect ratio (cols / rows).
pub const MAX_GRID_ASPECT: f64 = 10.0;

/// The simulation environment: locations scattered uniformly over a
/// `width x height` plane partitioned into an `rows x cols` grid of
/// equally-sized rectangular locales.
#[derive(Debug, Clone)]
pub struct GridWorld {
    width: f64,
    height: f64,
    locations: Vec<Location>,
    rows: usize,
    cols: usize,
    seed: u64,
}

/// One simulated trip with its censored and uncensored realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedEvent {
    pub source: usize,
    pub dest: usize,
    pub true_distance: f64,
    pub origin_locale: String,
    pub dest_locale: String,
}

/// Balanced factor pair `r <= c`, `r * c = n`, minimizing `c - r`.
fn balanced_factor_pair(n: usize) -> (usize, usize) {
    let mut r = (n as f64).sqrt().floor() as usize;
    while r > 1 && n % r != 0 {
        r -= 1;
    }
    (r.max(1), n / r.max(1))
}

fn grid_shape(n_locales: usize) -> Result<(usize, usize)> {
    let (r, c) = balanced_factor_pair(n_locales);
    if c as f64 / r as f64 <= MAX_GRID_ASPECT {
        return Ok((r, c));
    }
    let mut suggestions = Vec::new();
    let mut offset = 1usize;
    while suggestions.len() < 4 && offset < n_locales {
        for candidate in [n_locales.saturating_sub(offset), n_locales + offset] {
            if candidate >= 1 && !suggestions.contains(&candidate) {
                let (rr, cc) = balanced_factor_pair(candidate);
                if cc as f64 / rr as f64 <= MAX_GRID_ASPECT {
                    suggestions.push(candidate);
                }
            }
        }
        offset += 1;
    }
    suggestions.sort_unstable();
    Err(Error::LocaleCount {
        requested: n_locales,
        max_aspect: MAX_GRID_ASPECT,
        suggestions,
    })
}

/// Builds a world: `n_locations` i.i.d. uniform points and a locale grid
/// with `n_locales` cells arranged as the most balanced factor pair.
pub fn build(
    width: f64,
    height: f64,
    n_locations: usize,
    n_locales: usize,
    seed: u64,
) -> Result<GridWorld> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::InvalidWorld(format!(
            "grid extent must be positive and finite, got {width} x {height}"
        )));
    }
    if n_locations < 2 {
        return Err(Error::InvalidWorld(format!(
            "need at least 2 locations, got {n_locations}"
        )));
    }
    if n_locales == 0 {
        return Err(Error::InvalidWorld("need at least 1 locale".into()));
    }
    let (rows, cols) = grid_shape(n_locales)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations = (0..n_locations)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * width;
            let y: f64 = rng.random::<f64>() * height;
            Location::new(x, y)
        })
        .collect();
    Ok(GridWorld {
        width,
        height,
        locations,
        rows,
        cols,
        seed,
    })
}

impl GridWorld {
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_locales(&self) -> usize {
        self.rows * self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn cell_width(&self) -> f64 {
        self.width / self.cols as f64
    }

    fn cell_height(&self) -> f64 {
        self.height / self.rows as f64
    }

    /// Locale id for a grid cell.
    pub fn locale_id(row: usize, col: usize) -> String {
        format!("r{row}c{col}")
    }

    /// Grid cell containing a location. Points exactly on a shared edge go
    /// to the cell with the smaller index, so the cells partition the plane.
    pub fn locale_of(&self, location: &Location) -> (usize, usize) {
        let row = cell_index(location.y, self.cell_height(), self.rows);
        let col = cell_index(location.x, self.cell_width(), self.cols);
        (row, col)
    }

    /// Rectangle polygon for one grid cell.
    pub fn locale_polygon(&self, row: usize, col: usize) -> Result<Locale> {
        let cw = self.cell_width();
        let ch = self.cell_height();
        Locale::rectangle(
            Self::locale_id(row, col),
            col as f64 * cw,
            row as f64 * ch,
            (col + 1) as f64 * cw,
            (row + 1) as f64 * ch,
        )
    }

    /// All grid-cell locales keyed by id.
    pub fn locales(&self) -> Result<LocaleMap> {
        let mut map = LocaleMap::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                let locale = self.locale_polygon(row, col)?;
                map.insert(locale.id().to_string(), locale);
            }
        }
        Ok(map)
    }

    /// Destination probabilities from `source` under the inverse distance
    /// policy: weight `1 / (1 + f(x, y_i))` for every other location, zero
    /// at the source itself, normalized to sum 1.
    pub fn destination_distribution(&self, source: usize) -> Vec<f64> {
        assert!(source < self.locations.len(), "source index out of range");
        let from = self.locations[source];
        let mut weights: Vec<f64> = self
            .locations
            .iter()
            .enumerate()
            .map(|(i, to)| {
                if i == source {
                    0.0
                } else {
                    1.0 / (1.0 + euclidean(&from, to))
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        weights
    }

    /// Generates `n_events` trips: source uniform over locations,
    /// destination from the inverse distance policy. Deterministic given
    /// the seed.
    pub fn generate_events(&self, n_events: usize, seed: u64) -> Result<Vec<SimulatedEvent>> {
        if self.locations.len() < 2 {
            return Err(Error::InvalidWorld(
                "event generation needs at least 2 locations".into(),
            ));
        }
        if n_events == 0 {
            return Err(Error::InvalidInput("n_events must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = Vec::with_capacity(n_events);
        for _ in 0..n_events {
            let source = rng.random_range(0..self.locations.len());
            let probabilities = self.destination_distribution(source);
            let dest = sample_index(&probabilities, rng.random());
            let from = self.locations[source];
            let to = self.locations[dest];
            let (orow, ocol) = self.locale_of(&from);
            let (drow, dcol) = self.locale_of(&to);
            events.push(SimulatedEvent {
                source,
                dest,
                true_distance: euclidean(&from, &to),
                origin_locale: Self::locale_id(orow, ocol),
                dest_locale: Self::locale_id(drow, dcol),
            });
        }
        Ok(events)
    }

    /// Censored realizations of the events, resolved to distance intervals
    /// against this world's locale rectangles (euclidean metric).
    pub fn censor(
        &self,
        events: &[SimulatedEvent],
        samples_per_edge: usize,
    ) -> Result<EventCollection> {
        let locales = self.locales()?;
        let pairs = censored_pairs(events);
        EventCollection::from_events(
            &pairs,
            &locales,
            crate::geometry::DistanceMetric::Euclidean,
            samples_per_edge,
        )
    }
}

/// The (origin locale, destination locale) pair of each event, in order,
/// with unit counts.
pub fn censored_pairs(events: &[SimulatedEvent]) -> Vec<CensoredEvent> {
    events
        .iter()
        .map(|e| CensoredEvent::new(e.origin_locale.clone(), e.dest_locale.clone(), 1.0))
        .collect()
}

/// True distances of the events, index-aligned with the censored pairs.
pub fn uncensored_distances(events: &[SimulatedEvent]) -> Vec<f64> {
    events.iter().map(|e| e.true_distance).collect()
}

fn cell_index(coord: f64, cell: f64, count: usize) -> usize {
    let mut idx = (coord / cell).floor() as usize;
    if idx >= count {
        idx = count - 1;
    }
    // boundary tie goes to the lower cell
    if idx > 0 && coord <= idx as f64 * cell {
        idx -= 1;
    }
    idx
}

fn sample_index(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut fallback = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            fallback = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    fallback
}

/// Node of the spatial network induced by a set of events.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkNode {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// Undirected edge weighted by trip multiplicity.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkLink {
    pub source: usize,
    pub target: usize,
    pub weight: u64,
}

/// Node-link representation of the trips: nodes are the locations that
/// appear in at least one event, edges are location pairs weighted by how
/// often they were travelled.
#[derive(Debug, Clone, Serialize)]
pub struct SpatialNetwork {
    pub nodes: Vec<NetworkNode>,
    pub links: Vec<NetworkLink>,
}

pub fn to_spatial_network(world: &GridWorld, events: &[SimulatedEvent]) -> SpatialNetwork {
    use std::collections::{BTreeMap, BTreeSet};
    let mut node_ids = BTreeSet::new();
    let mut edge_weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for event in events {
        node_ids.insert(event.source);
        node_ids.insert(event.dest);
        let key = (
            event.source.min(event.dest),
            event.source.max(event.dest),
        );
        *edge_weights.entry(key).or_insert(0) += 1;
    }
    SpatialNetwork {
        nodes: node_ids
            .into_iter()
            .map(|id| {
                let p = world.locations()[id];
                NetworkNode { id, x: p.x, y: p.y }
            })
            .collect(),
        links: edge_weights
            .into_iter()
            .map(|((source, target), weight)| NetworkLink {
                source,
                target,
                weight,
            })
            .collect(),
    }
}
