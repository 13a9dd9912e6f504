//! File formats shared between the library and the command-line tool.
//!
//! - locales: GeoJSON FeatureCollection of Polygon features with a string
//!   `id` property (holes are ignored with a warning);
//! - events: CSV `origin_id,dest_id,count` (count optional, default 1);
//! - intervals: CSV `lower,upper,count` (count optional, default 1);
//! - curves: CSV `d,mass,S,S_lower,S_upper` behind a `# alpha=...` comment;
//! - samples: single-column CSV `distance` behind a `# seed=... alpha=...`
//!   comment;
//! - test reports and spatial networks: JSON.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! written twice from the same data is byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{CensoredEvent, DistanceInterval, Locale, LocaleMap, Location};
use crate::simulation::{SimulatedEvent, SpatialNetwork};
use crate::stats::TestReport;
use crate::survival::{ConfidenceBand, SurvivalCurve};

fn display_path(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// GeoJSON locales
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct GeoFeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<GeoFeature>,
}

#[derive(Deserialize)]
struct GeoFeature {
    #[serde(default)]
    properties: serde_json::Map<String, serde_json::Value>,
    geometry: GeoGeometry,
}

#[derive(Deserialize)]
struct GeoGeometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: serde_json::Value,
}

/// Reads locales from a GeoJSON FeatureCollection. Every feature must be a
/// Polygon carrying a string property `id`; only the exterior ring is used
/// and interior rings are ignored with a warning on stderr.
pub fn read_locales_geojson(path: &Path) -> Result<LocaleMap> {
    let file = display_path(path);
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {file}"), e))?;
    let collection: GeoFeatureCollection = serde_json::from_str(&text)
        .map_err(|e| Error::format(&file, format!("not a GeoJSON FeatureCollection: {e}")))?;
    if collection.kind != "FeatureCollection" {
        return Err(Error::format(
            &file,
            format!("expected FeatureCollection, found {}", collection.kind),
        ));
    }
    let mut map = LocaleMap::new();
    for (index, feature) in collection.features.iter().enumerate() {
        let id = feature
            .properties
            .get("id")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                Error::format(
                    &file,
                    format!("feature {index} is missing a string `id` property"),
                )
            })?;
        if feature.geometry.kind != "Polygon" {
            return Err(Error::format(
                &file,
                format!(
                    "feature `{id}` has geometry {}, only Polygon is supported",
                    feature.geometry.kind
                ),
            ));
        }
        let rings: Vec<Vec<[f64; 2]>> = serde_json::from_value(feature.geometry.coordinates.clone())
            .map_err(|e| Error::format(&file, format!("feature `{id}`: bad coordinates: {e}")))?;
        if rings.is_empty() {
            return Err(Error::format(&file, format!("feature `{id}` has no rings")));
        }
        if rings.len() > 1 {
            eprintln!(
                "warning: locale `{id}`: ignoring {} interior ring(s)",
                rings.len() - 1
            );
        }
        let boundary: Vec<Location> = rings[0]
            .iter()
            .map(|&[x, y]| Location::new(x, y))
            .collect();
        let locale = Locale::new(id, boundary)?;
        if map.insert(id.to_string(), locale).is_some() {
            return Err(Error::format(&file, format!("duplicate locale id `{id}`")));
        }
    }
    Ok(map)
}

/// Writes locales as a GeoJSON FeatureCollection (closing vertex repeated,
/// as GeoJSON expects).
pub fn write_locales_geojson(path: &Path, locales: &LocaleMap) -> Result<()> {
    let features: Vec<serde_json::Value> = locales
        .values()
        .map(|locale| {
            let mut ring: Vec<[f64; 2]> = locale.boundary().iter().map(|p| [p.x, p.y]).collect();
            if let Some(&first) = ring.first() {
                ring.push(first);
            }
            serde_json::json!({
                "type": "Feature",
                "properties": { "id": locale.id() },
                "geometry": { "type": "Polygon", "coordinates": [ring] },
            })
        })
        .collect();
    let doc = serde_json::json!({ "type": "FeatureCollection", "features": features });
    write_json_value(path, &doc)
}

// ---------------------------------------------------------------------------
// CSV inputs
// ---------------------------------------------------------------------------

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", display_path(path)), e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn parse_field<T: std::str::FromStr>(
    file: &str,
    line: u64,
    name: &str,
    value: &str,
) -> Result<T> {
    value.parse().map_err(|_| {
        Error::format(
            file,
            format!("line {line}: cannot parse {name} from `{value}`"),
        )
    })
}

/// Reads censored events from CSV with header `origin_id,dest_id,count`;
/// the count column is optional and defaults to 1.
pub fn read_events_csv(path: &Path) -> Result<Vec<CensoredEvent>> {
    let file = display_path(path);
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&file, e.to_string()))?
        .clone();
    let origin_col = header_index(&headers, "origin_id")
        .ok_or_else(|| Error::format(&file, "missing `origin_id` column"))?;
    let dest_col = header_index(&headers, "dest_id")
        .ok_or_else(|| Error::format(&file, "missing `dest_id` column"))?;
    let count_col = header_index(&headers, "count");
    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
        let line = i as u64 + 2;
        let origin = record
            .get(origin_col)
            .ok_or_else(|| Error::format(&file, format!("line {line}: missing origin_id")))?;
        let dest = record
            .get(dest_col)
            .ok_or_else(|| Error::format(&file, format!("line {line}: missing dest_id")))?;
        let count = match count_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(raw) => parse_field::<f64>(&file, line, "count", raw)?,
            None => 1.0,
        };
        events.push(CensoredEvent::new(origin, dest, count));
    }
    Ok(events)
}

/// Writes events as CSV `origin_id,dest_id,count`.
pub fn write_events_csv(path: &Path, events: &[CensoredEvent]) -> Result<()> {
    let mut out = String::from("origin_id,dest_id,count\n");
    for e in events {
        out.push_str(&format!("{},{},{}\n", e.origin_id, e.dest_id, e.count));
    }
    write_text(path, &out)
}

/// Reads intervals from CSV with header `lower,upper,count`; the count
/// column is optional and defaults to 1.
pub fn read_intervals_csv(path: &Path) -> Result<Vec<DistanceInterval>> {
    let file = display_path(path);
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&file, e.to_string()))?
        .clone();
    let lower_col = header_index(&headers, "lower")
        .ok_or_else(|| Error::format(&file, "missing `lower` column"))?;
    let upper_col = header_index(&headers, "upper")
        .ok_or_else(|| Error::format(&file, "missing `upper` column"))?;
    let count_col = header_index(&headers, "count");
    let mut intervals = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
        let line = i as u64 + 2;
        let lower: f64 = parse_field(&file, line, "lower", record.get(lower_col).unwrap_or(""))?;
        let upper: f64 = parse_field(&file, line, "upper", record.get(upper_col).unwrap_or(""))?;
        let count = match count_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(raw) => parse_field::<f64>(&file, line, "count", raw)?,
            None => 1.0,
        };
        intervals.push(DistanceInterval::weighted(lower, upper, count)?);
    }
    Ok(intervals)
}

/// Writes intervals as CSV `lower,upper,count`.
pub fn write_intervals_csv(path: &Path, intervals: &[DistanceInterval]) -> Result<()> {
    let mut out = String::from("lower,upper,count\n");
    for iv in intervals {
        out.push_str(&format!("{},{},{}\n", iv.lower, iv.upper, iv.weight));
    }
    write_text(path, &out)
}

// ---------------------------------------------------------------------------
// Curves and samples
// ---------------------------------------------------------------------------

/// Writes a fitted curve with its band: `# alpha=...` then one
/// `d,mass,S,S_lower,S_upper` row per evaluation point.
pub fn write_curve_csv(path: &Path, curve: &SurvivalCurve, band: &ConfidenceBand) -> Result<()> {
    let mut out = format!("# alpha={}\n", band.alpha());
    out.push_str("d,mass,S,S_lower,S_upper\n");
    for j in 0..curve.eval_points().len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            curve.eval_points()[j],
            curve.mass()[j],
            curve.survival()[j],
            band.s_lower()[j],
            band.s_upper()[j],
        ));
    }
    write_text(path, &out)
}

/// Reads a curve CSV back as a step CDF (point masses at the evaluation
/// points). Count information is not stored in the file, so the returned
/// curve is suitable for evaluation and KS comparison, not for new bands.
pub fn read_curve_csv(path: &Path) -> Result<SurvivalCurve> {
    let file = display_path(path);
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&file, e.to_string()))?
        .clone();
    let d_col =
        header_index(&headers, "d").ok_or_else(|| Error::format(&file, "missing `d` column"))?;
    let mass_col = header_index(&headers, "mass")
        .ok_or_else(|| Error::format(&file, "missing `mass` column"))?;
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
        let line = i as u64 + 3;
        points.push(parse_field::<f64>(
            &file,
            line,
            "d",
            record.get(d_col).unwrap_or(""),
        )?);
        masses.push(parse_field::<f64>(
            &file,
            line,
            "mass",
            record.get(mass_col).unwrap_or(""),
        )?);
    }
    if points.is_empty() {
        return Err(Error::format(&file, "curve file has no rows"));
    }
    // zero-mass support points carry no information for a reloaded curve
    let kept: Vec<(f64, f64)> = points
        .into_iter()
        .zip(masses)
        .filter(|&(_, m)| m > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::format(&file, "curve file has no positive masses"));
    }
    let (points, masses): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    SurvivalCurve::from_weighted_points(&points, &masses)
}

/// Writes samples: `# seed=... alpha=...` then a `distance` column.
pub fn write_samples_csv(path: &Path, samples: &[f64], seed: u64, alpha: f64) -> Result<()> {
    let mut out = format!("# seed={seed} alpha={alpha}\ndistance\n");
    for s in samples {
        out.push_str(&format!("{s}\n"));
    }
    write_text(path, &out)
}

/// Reads a single-column `distance` CSV.
pub fn read_samples_csv(path: &Path) -> Result<Vec<f64>> {
    let file = display_path(path);
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&file, e.to_string()))?
        .clone();
    let col = header_index(&headers, "distance")
        .ok_or_else(|| Error::format(&file, "missing `distance` column"))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
        let line = i as u64 + 3;
        samples.push(parse_field::<f64>(
            &file,
            line,
            "distance",
            record.get(col).unwrap_or(""),
        )?);
    }
    Ok(samples)
}

/// Truth export for simulated events: `event_index,true_distance`.
pub fn write_truth_csv(path: &Path, events: &[SimulatedEvent]) -> Result<()> {
    let mut out = String::from("event_index,true_distance\n");
    for (i, e) in events.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, e.true_distance));
    }
    write_text(path, &out)
}

// ---------------------------------------------------------------------------
// JSON outputs
// ---------------------------------------------------------------------------

pub fn write_report_json(path: &Path, report: &TestReport) -> Result<()> {
    let value = serde_json::to_value(report)
        .map_err(|e| Error::format(display_path(path), e.to_string()))?;
    write_json_value(path, &value)
}

pub fn write_network_json(path: &Path, network: &SpatialNetwork) -> Result<()> {
    let value = serde_json::to_value(network)
        .map_err(|e| Error::format(display_path(path), e.to_string()))?;
    write_json_value(path, &value)
}

fn write_json_value(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(display_path(path), e.to_string()))?;
    write_text(path, &format!("{text}\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let context = format!("writing {}", display_path(path));
    let mut file = fs::File::create(path).map_err(|e| Error::io(&context, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&context, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{fit, greenwood_band, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use tempfile::tempdir;

    #[test]
    fn events_csv_round_trip_and_default_count() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.csv");
        std::fs::write(&path, "origin_id,dest_id,count\na,b,3\nb,a,\n").unwrap();
        let events = read_events_csv(&path).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].count, 3.0);
        assert_eq!(events[1].count, 1.0);

        write_events_csv(&path, &events).unwrap();
        let again = read_events_csv(&path).unwrap();
        assert_eq!(events, again);
    }

    #[test]
    fn events_csv_without_count_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.csv");
        std::fs::write(&path, "origin_id,dest_id\na,b\n").unwrap();
        let events = read_events_csv(&path).unwrap();
        assert_eq!(events[0].count, 1.0);
    }

    #[test]
    fn intervals_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("iv.csv");
        let intervals = vec![
            DistanceInterval::weighted(0.0, 2.0, 4.0).unwrap(),
            DistanceInterval::new(1.5, 3.25).unwrap(),
        ];
        write_intervals_csv(&path, &intervals).unwrap();
        let read = read_intervals_csv(&path).unwrap();
        assert_eq!(intervals, read);
    }

    #[test]
    fn intervals_csv_rejects_bad_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("iv.csv");
        std::fs::write(&path, "lower,upper\n3,1\n").unwrap();
        assert!(read_intervals_csv(&path).is_err());
        std::fs::write(&path, "lower,upper\nx,1\n").unwrap();
        assert!(read_intervals_csv(&path).is_err());
    }

    #[test]
    fn curve_csv_round_trips_the_step_cdf() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let obs = vec![
            DistanceInterval::new(1.0, 1.0).unwrap(),
            DistanceInterval::new(2.0, 2.0).unwrap(),
            DistanceInterval::new(5.0, 5.0).unwrap(),
        ];
        let curve = fit(&obs, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let band = greenwood_band(&curve, 0.05).unwrap();
        write_curve_csv(&path, &curve, &band).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# alpha=0.05\nd,mass,S,S_lower,S_upper\n"));

        let reloaded = read_curve_csv(&path).unwrap();
        assert_eq!(reloaded.eval_points(), curve.eval_points());
        for d in [0.5, 1.0, 1.7, 2.0, 4.0, 5.0, 6.0] {
            assert!((reloaded.evaluate(d).1 - curve.evaluate(d).1).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let samples = vec![0.5, 1.25, 3.0];
        write_samples_csv(&path, &samples, 7, 0.05).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed=7 alpha=0.05\ndistance\n"));
        assert_eq!(read_samples_csv(&path).unwrap(), samples);
    }

    #[test]
    fn geojson_round_trip_with_hole_warning() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("locales.geojson");
        std::fs::write(
            &path,
            r#"{
  "type": "FeatureCollection",
  "features": [
    {
      "type": "Feature",
      "properties": { "id": "a" },
      "geometry": {
        "type": "Polygon",
        "coordinates": [
          [[0, 0], [4, 0], [4, 4], [0, 4], [0, 0]],
          [[1, 1], [2, 1], [2, 2], [1, 2], [1, 1]]
        ]
      }
    }
  ]
}"#,
        )
        .unwrap();
        let map = read_locales_geojson(&path).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map["a"].boundary().len(), 4);

        let out = dir.path().join("out.geojson");
        write_locales_geojson(&out, &map).unwrap();
        let again = read_locales_geojson(&out).unwrap();
        assert_eq!(map["a"], again["a"]);
    }

    #[test]
    fn geojson_rejects_non_polygon_and_missing_id() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.geojson");
        std::fs::write(
            &path,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"id":"x"},"geometry":{"type":"Point","coordinates":[0,0]}}]}"#,
        )
        .unwrap();
        assert!(read_locales_geojson(&path).is_err());
        std::fs::write(
            &path,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}]}"#,
        )
        .unwrap();
        assert!(read_locales_geojson(&path).is_err());
    }
}
