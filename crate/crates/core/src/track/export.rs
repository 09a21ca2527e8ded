//! GeoJSON (RFC 7946) and KML 2.2 renderings of a trajectory.

use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{TrackError, Trajectory};
use crate::geo::GeoPoint;
use crate::media::{GeotagResult, GeotagStatus};
use crate::mission::{planned_path, MissionPlan};

fn position(p: &GeoPoint) -> Value {
    match p.alt_m {
        Some(a) => json!([p.lon_deg, p.lat_deg, a]),
        None => json!([p.lon_deg, p.lat_deg]),
    }
}

fn feature(geometry: Value, properties: Value) -> Value {
    json!({"type": "Feature", "geometry": geometry, "properties": properties})
}

fn interpolated(tags: &[GeotagResult]) -> impl Iterator<Item = (&GeotagResult, &GeoPoint)> {
    tags.iter().filter_map(|g| match (g.confidence, &g.position) {
        (GeotagStatus::Interpolated, Some(p)) => Some((g, p)),
        _ => None,
    })
}

/// FeatureCollection with the flown line, the planned line when a plan is
/// given, takeoff and last-point markers, and interpolated media positions.
pub fn export_geojson(
    traj: &Trajectory,
    plan: Option<&MissionPlan>,
    geotags: &[GeotagResult],
) -> Result<Vec<u8>, TrackError> {
    let (first, last) = match (traj.samples.first(), traj.samples.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(TrackError::Empty),
    };
    let mut features = vec![feature(
        json!({"type": "LineString", "coordinates": traj.samples.iter().map(|s| position(&s.position)).collect::<Vec<_>>()}),
        json!({"role": "flown", "source": traj.source_note, "samples": traj.len()}),
    )];
    if let Some(plan) = plan {
        let path = planned_path(plan);
        features.push(feature(
            json!({"type": "LineString", "coordinates": path.iter().map(position).collect::<Vec<_>>()}),
            json!({"role": "planned", "items": plan.items.len()}),
        ));
    }
    features.push(feature(
        json!({"type": "Point", "coordinates": position(&first.position)}),
        json!({"role": "takeoff", "t_us": first.t_us}),
    ));
    features.push(feature(
        json!({"type": "Point", "coordinates": position(&last.position)}),
        json!({"role": "last_point", "t_us": last.t_us}),
    ));
    for (g, p) in interpolated(geotags) {
        features.push(feature(
            json!({"type": "Point", "coordinates": position(p)}),
            json!({"role": "media", "file_name": g.file_name, "t_log_us": g.t_log_us}),
        ));
    }
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut out = serde_json::to_vec_pretty(&doc).expect("serialising a JSON value");
    out.push(b'\n');
    Ok(out)
}

fn kml_coord(p: &GeoPoint) -> String {
    format!("{},{},{}", p.lon_deg, p.lat_deg, p.alt_m.unwrap_or(0.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn line_placemark(out: &mut String, name: &str, points: &[GeoPoint]) {
    let _ = writeln!(out, "    <Placemark>\n      <name>{}</name>\n      <LineString>", escape(name));
    out.push_str("        <altitudeMode>absolute</altitudeMode>\n        <coordinates>\n");
    for p in points {
        let _ = writeln!(out, "          {}", kml_coord(p));
    }
    out.push_str("        </coordinates>\n      </LineString>\n    </Placemark>\n");
}

/// KML document with absolute-altitude line strings and media placemarks.
pub fn export_kml(
    traj: &Trajectory,
    plan: Option<&MissionPlan>,
    geotags: &[GeotagResult],
) -> Result<Vec<u8>, TrackError> {
    if traj.is_empty() {
        return Err(TrackError::Empty);
    }
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n  <Document>\n    <name>Flight track</name>\n",
    );
    line_placemark(&mut out, "Flown track", &traj.positions());
    if let Some(plan) = plan {
        line_placemark(&mut out, "Planned mission", &planned_path(plan));
    }
    for (g, p) in interpolated(geotags) {
        let _ = writeln!(
            out,
            "    <Placemark>\n      <name>{}</name>\n      <Point>\n        <altitudeMode>absolute</altitudeMode>\n        <coordinates>{}</coordinates>\n      </Point>\n    </Placemark>",
            escape(&g.file_name),
            kml_coord(p)
        );
    }
    out.push_str("  </Document>\n</kml>\n");
    Ok(out.into_bytes())
}
