//! Flown trajectory reconstruction and flight-summary statistics.

mod export;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{distance_3d_m, local_offset_m, offset_point, GeoPoint};
use crate::ulog::{FlightLog, ParamValue, TimeSeries};

pub use export::{export_geojson, export_kml};

/// Maximum timestamp distance for the nearest-sample join of auxiliary series.
pub const JOIN_WINDOW_US: u64 = 50_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("log contains no usable position series")]
    NoPosition,
    #[error("trajectory is empty")]
    Empty,
    #[error("invalid trajectory: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t_us: u64,
    pub position: GeoPoint,
    /// North, east, down from the estimator's local origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_ned_m: Option<[f64; 3]>,
    /// NED velocity in m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_mps: Option<[f64; 3]>,
    /// Unit quaternion `[w, x, y, z]`, body to NED.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude_quat: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrackSample>,
    /// `fused`, `gps-fallback` or `synthetic`.
    pub source_note: String,
    /// Log series that contributed to the samples.
    #[serde(default)]
    pub series_used: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Trajectory {
    /// Checks ordering and quaternion normalisation.
    pub fn new(samples: Vec<TrackSample>, source_note: &str) -> Result<Self, TrackError> {
        for w in samples.windows(2) {
            if w[1].t_us <= w[0].t_us {
                return Err(TrackError::Invalid(format!(
                    "timestamps not strictly increasing at t={} us",
                    w[1].t_us
                )));
            }
        }
        for s in &samples {
            if let Some(q) = s.attitude_quat {
                let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-6 {
                    return Err(TrackError::Invalid(format!(
                        "quaternion norm {n} at t={} us",
                        s.t_us
                    )));
                }
            }
        }
        Ok(Trajectory {
            samples,
            source_note: source_note.into(),
            series_used: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.t_us - a.t_us) as f64 / 1e6,
            _ => 0.0,
        }
    }

    pub fn positions(&self) -> Vec<GeoPoint> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

struct Joined<'a> {
    series: &'a TimeSeries,
    cols: Vec<Vec<f64>>,
}

impl<'a> Joined<'a> {
    fn new(series: &'a TimeSeries, names: &[&str]) -> Option<Self> {
        let cols = names
            .iter()
            .map(|n| series.column_f64(n))
            .collect::<Option<Vec<_>>>()?;
        Some(Joined { series, cols })
    }

    /// Row index nearest to `t` within the join window.
    fn nearest(&self, t: u64) -> Option<usize> {
        let rows = &self.series.rows;
        let i = rows.partition_point(|r| r.timestamp_us < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < rows.len())
            .map(|j| (rows[j].timestamp_us.abs_diff(t), j))
            .filter(|(d, _)| *d <= JOIN_WINDOW_US)
            .min()
            .map(|(_, j)| j)
    }

    fn values(&self, row: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[row]).collect()
    }
}

fn finite<const N: usize>(v: &[f64]) -> Option<[f64; N]> {
    let a: [f64; N] = v.try_into().ok()?;
    a.iter().all(|x| x.is_finite()).then_some(a)
}

fn normalized(q: [f64; 4]) -> Option<[f64; 4]> {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    (n.is_finite() && n > 0.5).then(|| q.map(|c| c / n))
}

struct PositionSource<'a> {
    series: &'a TimeSeries,
    note: &'static str,
    /// Decoded position per row; `None` for unusable rows.
    points: Vec<Option<GeoPoint>>,
    velocity: Option<Joined<'a>>,
}

fn fused_global(log: &FlightLog) -> Option<PositionSource<'_>> {
    let s = log.series_named("vehicle_global_position")?;
    let j = Joined::new(s, &["lat", "lon", "alt"])?;
    let points = (0..s.rows.len())
        .map(|i| {
            let v = j.values(i);
            GeoPoint::new(v[0], v[1], Some(v[2])).ok()
        })
        .collect();
    Some(PositionSource {
        series: s,
        note: "fused",
        points,
        velocity: None,
    })
}

/// Local position carrying its own global reference, for logs without the
/// global topic.
fn fused_local(log: &FlightLog) -> Option<PositionSource<'_>> {
    let s = log.series_named("vehicle_local_position")?;
    let j = Joined::new(s, &["x", "y", "z", "ref_lat", "ref_lon", "ref_alt"])?;
    let points = (0..s.rows.len())
        .map(|i| {
            let v = j.values(i);
            let origin = GeoPoint::new(v[3], v[4], Some(v[5])).ok()?;
            finite::<3>(&v[..3])?;
            Some(offset_point(&origin, v[0], v[1], -v[2]))
        })
        .collect();
    Some(PositionSource {
        series: s,
        note: "fused",
        points,
        velocity: None,
    })
}

fn gps(log: &FlightLog) -> Option<PositionSource<'_>> {
    let s = ["vehicle_gps_position", "sensor_gps"]
        .iter()
        .find_map(|n| log.series_named(n))?;
    let points = if let Some(j) = Joined::new(s, &["latitude_deg", "longitude_deg", "altitude_msl_m"]) {
        (0..s.rows.len())
            .map(|i| {
                let v = j.values(i);
                GeoPoint::new(v[0], v[1], Some(v[2])).ok()
            })
            .collect()
    } else {
        let j = Joined::new(s, &["lat", "lon", "alt"])?;
        (0..s.rows.len())
            .map(|i| {
                let v = j.values(i);
                GeoPoint::new(v[0] * 1e-7, v[1] * 1e-7, Some(v[2] * 1e-3)).ok()
            })
            .collect()
    };
    Some(PositionSource {
        series: s,
        note: "gps-fallback",
        points,
        velocity: Joined::new(s, &["vel_n_m_s", "vel_e_m_s", "vel_d_m_s"]),
    })
}

/// Reconstructs the flown path from the log's position topics.
///
/// Fused estimator output is preferred; raw GPS is used only when no fused
/// position exists. Local position, velocity and attitude are attached by a
/// nearest-timestamp join within [`JOIN_WINDOW_US`].
pub fn build_trajectory(log: &FlightLog) -> Result<Trajectory, TrackError> {
    let src = fused_global(log)
        .or_else(|| fused_local(log))
        .or_else(|| gps(log))
        .ok_or(TrackError::NoPosition)?;

    let local = log
        .series_named("vehicle_local_position")
        .and_then(|s| Joined::new(s, &["x", "y", "z"]));
    let local_vel = log
        .series_named("vehicle_local_position")
        .and_then(|s| Joined::new(s, &["vx", "vy", "vz"]));
    let attitude = log
        .series_named("vehicle_attitude")
        .and_then(|s| Joined::new(s, &["q[0]", "q[1]", "q[2]", "q[3]"]));
    let velocity = if src.note == "fused" { local_vel.as_ref() } else { src.velocity.as_ref() };
    let local = if src.note == "fused" { local.as_ref() } else { None };

    let mut notes = Vec::new();
    let mut samples: Vec<TrackSample> = Vec::with_capacity(src.points.len());
    let (mut invalid, mut duplicate) = (0usize, 0usize);
    for (row, p) in src.series.rows.iter().zip(&src.points) {
        let Some(position) = *p else {
            invalid += 1;
            continue;
        };
        let t = row.timestamp_us;
        if samples.last().is_some_and(|s| s.t_us >= t) {
            duplicate += 1;
            continue;
        }
        let pick = |j: Option<&Joined>| j.and_then(|j| j.nearest(t).map(|i| j.values(i)));
        samples.push(TrackSample {
            t_us: t,
            position,
            local_ned_m: pick(local).and_then(|v| finite::<3>(&v)),
            velocity_mps: pick(velocity).and_then(|v| finite::<3>(&v)),
            attitude_quat: pick(attitude.as_ref())
                .and_then(|v| finite::<4>(&v))
                .and_then(normalized),
        });
    }
    if invalid > 0 {
        notes.push(format!("{invalid} position samples with invalid coordinates skipped"));
    }
    if duplicate > 0 {
        notes.push(format!("{duplicate} position samples with non-increasing timestamps skipped"));
    }
    if src.note == "gps-fallback" {
        notes.push("no fused position series; raw GPS positions used".into());
    }

    let mut series_used = vec![src.series.message_name.clone()];
    for (j, name) in [
        (local, "vehicle_local_position"),
        (attitude.as_ref(), "vehicle_attitude"),
    ] {
        if j.is_some() && !series_used.iter().any(|s| s == name) {
            series_used.push(name.into());
        }
    }
    if samples.is_empty() {
        return Err(TrackError::NoPosition);
    }
    Ok(Trajectory {
        samples,
        source_note: src.note.into(),
        series_used,
        notes,
    })
}

fn segment_length(a: &TrackSample, b: &TrackSample) -> f64 {
    match (a.local_ned_m, b.local_ned_m) {
        (Some(p), Some(q)) => ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt(),
        _ => distance_3d_m(&a.position, &b.position),
    }
}

/// Path length in meters: 3D segment sum, using local NED where both ends
/// carry it and haversine plus altitude otherwise. Zero for fewer than two
/// samples.
pub fn total_distance(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| segment_length(&w[0], &w[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeedStats {
    pub avg_mps: f64,
    pub max_mps: f64,
    pub max_up_mps: f64,
    pub max_down_mps: f64,
    /// True when at least one sample's velocity came from differentiating positions.
    pub differentiated: bool,
}

fn ned_between(a: &TrackSample, b: &TrackSample) -> [f64; 3] {
    match (a.local_ned_m, b.local_ned_m) {
        (Some(p), Some(q)) => [q[0] - p[0], q[1] - p[1], q[2] - p[2]],
        _ => {
            let [n, e, up] = local_offset_m(&a.position, &b.position);
            [n, e, -up]
        }
    }
}

/// Velocity at sample `i` by central difference (one-sided at the ends).
fn differentiated_velocity(s: &[TrackSample], i: usize) -> [f64; 3] {
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(s.len() - 1);
    let dt = (s[hi].t_us - s[lo].t_us) as f64 / 1e6;
    if dt <= 0.0 {
        return [0.0; 3];
    }
    ned_between(&s[lo], &s[hi]).map(|d| d / dt)
}

/// Average, maximum, climb and descent speeds.
///
/// Uses the logged NED velocity where present and position differences
/// elsewhere. Climb and descent follow the NED convention (down positive).
pub fn speed_stats(traj: &Trajectory) -> SpeedStats {
    let s = &traj.samples;
    if s.len() < 2 {
        return SpeedStats::default();
    }
    let mut out = SpeedStats::default();
    for (i, sample) in s.iter().enumerate() {
        let v = match sample.velocity_mps {
            Some(v) => v,
            None => {
                out.differentiated = true;
                differentiated_velocity(s, i)
            }
        };
        let mag = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        out.max_mps = out.max_mps.max(mag);
        out.max_up_mps = out.max_up_mps.max(-v[2]);
        out.max_down_mps = out.max_down_mps.max(v[2]);
    }
    let dur = traj.duration_s();
    if dur > 0.0 {
        out.avg_mps = total_distance(traj) / dur;
    }
    out
}

/// Angle between body z and world z for a `[w, x, y, z]` quaternion.
pub fn tilt_deg(q: &[f64; 4]) -> f64 {
    let c = 1.0 - 2.0 * (q[1] * q[1] + q[2] * q[2]);
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Largest tilt over samples carrying attitude; `None` without attitude.
pub fn max_tilt(traj: &Trajectory) -> Option<f64> {
    traj.samples
        .iter()
        .filter_map(|s| s.attitude_quat.as_ref().map(tilt_deg))
        .reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSummary {
    pub total_flight_time_s: f64,
    pub total_distance_m: f64,
    pub avg_speed_mps: f64,
    pub max_speed_mps: f64,
    pub max_up_speed_mps: f64,
    pub max_down_speed_mps: f64,
    pub max_tilt_deg: Option<f64>,
    pub os_version: Option<String>,
    pub estimator: Option<String>,
    pub arming_offset_s: Option<f64>,
    pub sample_count: usize,
    pub source_note: String,
    pub distance_method: String,
    pub notes: Vec<String>,
}

fn estimator_name(v: ParamValue) -> String {
    match v.as_f64() as i64 {
        1 => "LPE".into(),
        2 => "EKF2".into(),
        3 => "Q attitude estimator".into(),
        n => format!("estimator group {n}"),
    }
}

/// Table-style summary of one flight.
pub fn flight_summary(log: &FlightLog, traj: &Trajectory) -> FlightSummary {
    let mut notes = traj.notes.clone();
    let distance = total_distance(traj);
    let mut speeds = speed_stats(traj);
    if traj.len() < 2 {
        notes.push(format!(
            "degenerate trajectory ({} samples); duration, distance and speeds are zero",
            traj.len()
        ));
    }
    if speeds.avg_mps > speeds.max_mps {
        notes.push(format!(
            "logged velocity (max {:.3} m/s) is below the position-derived average {:.3} m/s; maximum raised to the average",
            speeds.max_mps, speeds.avg_mps
        ));
        speeds.max_mps = speeds.avg_mps;
    }
    if speeds.differentiated {
        notes.push("velocity differentiated from positions for samples without a logged velocity".into());
    }
    for d in &log.dropouts {
        notes.push(format!(
            "logger dropout of {} ms at t={:.3} s; distance across the gap is included",
            d.duration_ms,
            d.timestamp_us as f64 / 1e6
        ));
    }
    let all_local = traj.samples.iter().all(|s| s.local_ned_m.is_some());
    let distance_method = if all_local {
        "3D sum over local NED position"
    } else {
        "3D sum of haversine horizontal distance and altitude difference"
    };
    FlightSummary {
        total_flight_time_s: traj.duration_s(),
        total_distance_m: distance,
        avg_speed_mps: speeds.avg_mps,
        max_speed_mps: speeds.max_mps,
        max_up_speed_mps: speeds.max_up_mps,
        max_down_speed_mps: speeds.max_down_mps,
        max_tilt_deg: max_tilt(traj),
        os_version: log.os_version(),
        estimator: log
            .parameters
            .get("SYS_MC_EST_GROUP")
            .map(|e| estimator_name(e.value)),
        arming_offset_s: log.first_data_timestamp_us().map(|t| t as f64 / 1e6),
        sample_count: traj.len(),
        source_note: traj.source_note.clone(),
        distance_method: distance_method.into(),
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t_us: u64, n: f64, e: f64, d: f64) -> TrackSample {
        let origin = GeoPoint::new(47.0, 8.0, Some(400.0)).unwrap();
        TrackSample {
            t_us,
            position: offset_point(&origin, n, e, -d),
            local_ned_m: Some([n, e, d]),
            velocity_mps: None,
            attitude_quat: None,
        }
    }

    #[test]
    fn rejects_unordered_samples() {
        let s = vec![sample(10, 0.0, 0.0, 0.0), sample(10, 1.0, 0.0, 0.0)];
        assert!(Trajectory::new(s, "synthetic").is_err());
    }

    #[test]
    fn differentiated_speeds() {
        let s: Vec<_> = (0..11).map(|i| sample(i * 1_000_000, 0.0, 0.0, -(i as f64) * 2.0)).collect();
        let t = Trajectory::new(s, "synthetic").unwrap();
        let st = speed_stats(&t);
        assert!((st.max_up_mps - 2.0).abs() < 1e-9);
        assert_eq!(st.max_down_mps, 0.0);
        assert!((st.avg_mps - 2.0).abs() < 1e-9);
        assert!(st.differentiated);
    }

    #[test]
    fn tilt_of_identity_is_zero() {
        assert_eq!(tilt_deg(&[1.0, 0.0, 0.0, 0.0]), 0.0);
        assert!((tilt_deg(&[0.0, 1.0, 0.0, 0.0]) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_join_respects_window() {
        use crate::ulog::{FieldDef, LogBuilder, ScalarType, Value};
        let mut b = LogBuilder::new(0)
            .format(
                "vehicle_global_position",
                vec![
                    FieldDef::scalar(ScalarType::UInt64, "timestamp"),
                    FieldDef::scalar(ScalarType::Double, "lat"),
                    FieldDef::scalar(ScalarType::Double, "lon"),
                    FieldDef::scalar(ScalarType::Float, "alt"),
                ],
            )
            .format(
                "vehicle_attitude",
                vec![
                    FieldDef::scalar(ScalarType::UInt64, "timestamp"),
                    FieldDef::array(ScalarType::Float, "q", 4),
                ],
            );
        let g = b.subscribe("vehicle_global_position", 0).unwrap();
        let a = b.subscribe("vehicle_attitude", 0).unwrap();
        for t in [1_000_000u64, 2_000_000] {
            b.push(&g, vec![Value::U64(t), Value::F64(47.0), Value::F64(8.0), Value::F32(500.0)]);
        }
        b.push(&a, vec![Value::U64(1_040_000), Value::F32(1.0), Value::F32(0.0), Value::F32(0.0), Value::F32(0.0)]);
        b.push(&a, vec![Value::U64(2_060_000), Value::F32(1.0), Value::F32(0.0), Value::F32(0.0), Value::F32(0.0)]);
        let t = build_trajectory(&b.build()).unwrap();
        assert_eq!(t.source_note, "fused");
        assert!(t.samples[0].attitude_quat.is_some());
        assert!(t.samples[1].attitude_quat.is_none());
    }
}
