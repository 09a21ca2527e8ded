//! Media geotagging: camera capture times mapped onto the flight log clock
//! and interpolated along the reconstructed trajectory.

use std::collections::BTreeSet;
use std::io::Cursor;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{rfc3339, Sha256Hex};
use crate::geo::{distance_3d_m, lon_delta, GeoPoint};
use crate::track::Trajectory;
use crate::ulog::FlightLog;

/// Bracketing samples further apart than this are treated as a recording gap
/// and never interpolated across.
pub const MAX_INTERPOLATION_GAP_US: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediaError {
    #[error("log time {t_us} us outside trajectory window [{first_us}, {last_us}]")]
    OutOfRange { t_us: i64, first_us: u64, last_us: u64 },
    #[error("trajectory needs at least two samples for interpolation")]
    TooFewSamples,
    #[error("media manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaEntry {
    pub file_name: String,
    #[serde(with = "rfc3339")]
    pub capture_time: DateTime<Utc>,
    pub sha256: Sha256Hex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncorrelatableMedia {
    pub file_name: String,
    pub sha256: Sha256Hex,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MediaManifest {
    pub entries: Vec<MediaEntry>,
    #[serde(default)]
    pub uncorrelatable: Vec<UncorrelatableMedia>,
}

impl MediaManifest {
    pub fn new(
        mut entries: Vec<MediaEntry>,
        mut uncorrelatable: Vec<UncorrelatableMedia>,
    ) -> Result<Self, MediaError> {
        let mut seen = BTreeSet::new();
        for name in entries
            .iter()
            .map(|e| &e.file_name)
            .chain(uncorrelatable.iter().map(|u| &u.file_name))
        {
            if !seen.insert(name.clone()) {
                return Err(MediaError::Manifest(format!("duplicate file name {name:?}")));
            }
        }
        entries.sort_by(|a, b| a.file_name.cmp(&b.file_name));
        uncorrelatable.sort_by(|a, b| a.file_name.cmp(&b.file_name));
        Ok(MediaManifest {
            entries,
            uncorrelatable,
        })
    }

    pub fn from_json(s: &str) -> Result<Self, MediaError> {
        let m: MediaManifest =
            serde_json::from_str(s).map_err(|e| MediaError::Manifest(e.to_string()))?;
        MediaManifest::new(m.entries, m.uncorrelatable)
    }

    /// Builds a manifest from image files, reading capture times from EXIF.
    pub fn from_images<'a, I>(files: I) -> Result<Self, MediaError>
    where
        I: IntoIterator<Item = (&'a str, &'a [u8])>,
    {
        let mut entries = Vec::new();
        let mut unc = Vec::new();
        for (name, bytes) in files {
            let sha256 = Sha256Hex::of_bytes(bytes);
            match exif_capture_time(bytes) {
                Ok(t) => entries.push(MediaEntry {
                    file_name: name.into(),
                    capture_time: t,
                    sha256,
                }),
                Err(reason) => unc.push(UncorrelatableMedia {
                    file_name: name.into(),
                    sha256,
                    reason,
                }),
            }
        }
        MediaManifest::new(entries, unc)
    }
}

/// Capture time from `DateTimeOriginal` (falling back to `DateTime`), with
/// sub-seconds and offset applied when recorded. Times without an offset
/// are taken as UTC on the camera clock; [`ClockAlignment`] corrects them.
pub fn exif_capture_time(bytes: &[u8]) -> Result<DateTime<Utc>, String> {
    use exif::{In, Tag, Value};
    let data = exif::Reader::new()
        .read_from_container(&mut Cursor::new(bytes))
        .map_err(|e| format!("no readable EXIF: {e}"))?;
    let ascii = |tag: Tag| match data.get_field(tag, In::PRIMARY).map(|f| &f.value) {
        Some(Value::Ascii(v)) if !v.is_empty() => Some(v[0].clone()),
        _ => None,
    };
    let (raw, subsec, offset) = match ascii(Tag::DateTimeOriginal) {
        Some(r) => (r, ascii(Tag::SubSecTimeOriginal), ascii(Tag::OffsetTimeOriginal)),
        None => (
            ascii(Tag::DateTime).ok_or("EXIF has no capture date-time")?,
            ascii(Tag::SubSecTime),
            ascii(Tag::OffsetTime),
        ),
    };
    let mut dt = exif::DateTime::from_ascii(&raw).map_err(|e| format!("bad EXIF date-time: {e}"))?;
    if let Some(s) = subsec {
        let _ = dt.parse_subsec(&s);
    }
    if let Some(o) = offset {
        let _ = dt.parse_offset(&o);
    }
    let naive = NaiveDate::from_ymd_opt(dt.year.into(), dt.month.into(), dt.day.into())
        .and_then(|d| {
            d.and_hms_nano_opt(
                dt.hour.into(),
                dt.minute.into(),
                dt.second.into(),
                dt.nanosecond.unwrap_or(0),
            )
        })
        .ok_or_else(|| format!("EXIF date-time out of range: {}", String::from_utf8_lossy(&raw)))?;
    let utc = Utc.from_utc_datetime(&naive);
    Ok(match dt.offset {
        Some(min) => utc - chrono::Duration::minutes(min.into()),
        None => utc,
    })
}

/// Maps camera time onto the log clock: `t_log = capture + offset - epoch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockAlignment {
    /// UTC instant of log time zero (power-on).
    #[serde(with = "rfc3339")]
    pub log_epoch_utc: DateTime<Utc>,
    pub camera_offset_s: f64,
    /// How the epoch was obtained, e.g. `investigator` or `gps`.
    pub source: String,
}

impl ClockAlignment {
    pub fn to_log_us(&self, capture: &DateTime<Utc>) -> i64 {
        let offset_us = (self.camera_offset_s * 1e6).round() as i64;
        let cap = capture.timestamp_micros();
        cap + offset_us - self.log_epoch_utc.timestamp_micros()
    }
}

/// Log epoch derived from the first GPS fix carrying UTC time.
pub fn log_epoch_from_gps(log: &FlightLog) -> Option<DateTime<Utc>> {
    let s = ["vehicle_gps_position", "sensor_gps"]
        .iter()
        .find_map(|n| log.series_named(n))?;
    let i = s.column_index("time_utc_usec")?;
    s.rows.iter().find_map(|row| {
        let utc = row.values[i].as_f64().filter(|u| *u > 0.0)? as i64;
        DateTime::from_timestamp_micros(utc - row.timestamp_us as i64)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeotagStatus {
    Interpolated,
    /// Inside the flight window but in a recording gap.
    ExtrapolationRefused,
    OutOfFlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeotagResult {
    pub file_name: String,
    /// Present only for interpolated results.
    pub position: Option<GeoPoint>,
    pub t_log_us: i64,
    pub confidence: GeotagStatus,
    /// Distance between the bracketing samples, a bound on interpolation error.
    pub spacing_m: Option<f64>,
}

fn bracket(traj: &Trajectory, t_us: i64) -> Result<(usize, usize), MediaError> {
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(MediaError::TooFewSamples);
    }
    let (first, last) = (s[0].t_us, s[s.len() - 1].t_us);
    if t_us < first as i64 || t_us > last as i64 {
        return Err(MediaError::OutOfRange {
            t_us,
            first_us: first,
            last_us: last,
        });
    }
    let t = t_us as u64;
    let i = s.partition_point(|x| x.t_us < t);
    if s[i].t_us == t {
        return Ok((i, i));
    }
    Ok((i - 1, i))
}

/// Position at log time `t_us` by linear interpolation between bracketing
/// samples. Never extrapolates.
pub fn position_at(traj: &Trajectory, t_us: i64) -> Result<GeoPoint, MediaError> {
    let (a, b) = bracket(traj, t_us)?;
    let (sa, sb) = (&traj.samples[a], &traj.samples[b]);
    if a == b {
        return Ok(sa.position);
    }
    let f = (t_us as u64 - sa.t_us) as f64 / (sb.t_us - sa.t_us) as f64;
    let (pa, pb) = (sa.position, sb.position);
    let lerp = |x: f64, y: f64| x + (y - x) * f;
    let alt = match (pa.alt_m, pb.alt_m) {
        (Some(x), Some(y)) => Some(lerp(x, y)),
        _ => None,
    };
    let lon = pa.lon_deg + lon_delta(pa.lon_deg, pb.lon_deg) * f;
    Ok(GeoPoint::wrapped(lerp(pa.lat_deg, pb.lat_deg), lon, alt)
        .expect("interpolation stays within coordinate bounds"))
}

/// One result per manifest entry, in manifest order.
pub fn geotag(
    manifest: &MediaManifest,
    traj: &Trajectory,
    align: &ClockAlignment,
) -> Vec<GeotagResult> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let t = align.to_log_us(&e.capture_time);
            let mut r = GeotagResult {
                file_name: e.file_name.clone(),
                position: None,
                t_log_us: t,
                confidence: GeotagStatus::OutOfFlight,
                spacing_m: None,
            };
            if let Ok((a, b)) = bracket(traj, t) {
                let (sa, sb) = (&traj.samples[a], &traj.samples[b]);
                r.spacing_m = Some(distance_3d_m(&sa.position, &sb.position));
                if sb.t_us - sa.t_us > MAX_INTERPOLATION_GAP_US {
                    r.confidence = GeotagStatus::ExtrapolationRefused;
                } else {
                    r.position = position_at(traj, t).ok();
                    r.confidence = GeotagStatus::Interpolated;
                }
            }
            r
        })
        .collect()
}
