//! Shared coordinate primitive and spherical-earth distance helpers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for every great-circle computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside (-180, 180]")]
    Longitude(f64),
    #[error("altitude must be finite, got {0}")]
    Altitude(f64),
}

/// WGS84-style position. Altitude is meters above mean sea level unless the
/// owning structure says otherwise (mission items carry their own frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_m: Option<f64>,
}

#[derive(Deserialize)]
struct RawGeoPoint {
    lat_deg: f64,
    lon_deg: f64,
    #[serde(default)]
    alt_m: Option<f64>,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat_deg, raw.lon_deg, raw.alt_m)
    }
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: Option<f64>) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeoError::Latitude(lat_deg));
        }
        if !(lon_deg > -180.0 && lon_deg <= 180.0) {
            return Err(GeoError::Longitude(lon_deg));
        }
        if let Some(alt) = alt_m {
            if !alt.is_finite() {
                return Err(GeoError::Altitude(alt));
            }
        }
        Ok(GeoPoint {
            lat_deg,
            lon_deg,
            alt_m,
        })
    }

    /// Builds a point, wrapping longitude into (-180, 180]. Used when
    /// deriving positions arithmetically (interpolation, local offsets).
    pub fn wrapped(lat_deg: f64, lon_deg: f64, alt_m: Option<f64>) -> Result<Self, GeoError> {
        GeoPoint::new(lat_deg, wrap_lon(lon_deg), alt_m)
    }
}

pub(crate) fn wrap_lon(lon: f64) -> f64 {
    if lon > -180.0 && lon <= 180.0 {
        return lon;
    }
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l == -180.0 {
        l = 180.0;
    }
    l
}

/// Signed longitude difference `to - from`, taking the short way round.
pub(crate) fn lon_delta(from: f64, to: f64) -> f64 {
    let d = to - from;
    if d > 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

/// Great-circle surface distance in meters.
pub fn haversine_m(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let lat1 = a.lat_deg.to_radians();
    let lat2 = b.lat_deg.to_radians();
    let dlat = (b.lat_deg - a.lat_deg).to_radians();
    let dlon = lon_delta(a.lon_deg, b.lon_deg).to_radians();
    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * (s_lon * s_lon);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Horizontal great-circle distance combined with the altitude difference in
/// quadrature. Missing altitude on either side contributes no vertical term.
pub fn distance_3d_m(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let h = haversine_m(a, b);
    let v = match (a.alt_m, b.alt_m) {
        (Some(x), Some(y)) => y - x,
        _ => 0.0,
    };
    h.hypot(v)
}

/// Local tangent-plane offset (north, east, up) of `p` relative to `origin`,
/// in meters. Equirectangular; accurate at the few-kilometre scale.
pub fn local_offset_m(origin: &GeoPoint, p: &GeoPoint) -> [f64; 3] {
    let north = (p.lat_deg - origin.lat_deg).to_radians() * EARTH_RADIUS_M;
    let east = lon_delta(origin.lon_deg, p.lon_deg).to_radians()
        * EARTH_RADIUS_M
        * origin.lat_deg.to_radians().cos();
    let up = match (origin.alt_m, p.alt_m) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    [north, east, up]
}

/// Inverse of [`local_offset_m`].
pub fn offset_point(origin: &GeoPoint, north_m: f64, east_m: f64, up_m: f64) -> GeoPoint {
    let lat = origin.lat_deg + (north_m / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon_deg
        + (east_m / (EARTH_RADIUS_M * origin.lat_deg.to_radians().cos())).to_degrees();
    GeoPoint {
        lat_deg: lat.clamp(-90.0, 90.0),
        lon_deg: wrap_lon(lon),
        alt_m: origin.alt_m.map(|a| a + up_m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon, None).unwrap()
    }

    #[test]
    fn bounds_are_enforced() {
        assert!(GeoPoint::new(90.0, 180.0, None).is_ok());
        assert!(GeoPoint::new(90.1, 0.0, None).is_err());
        assert!(GeoPoint::new(0.0, -180.0, None).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0, None).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN, None).is_err());
        assert!(GeoPoint::new(0.0, 0.0, Some(f64::NAN)).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let bad = r#"{"lat_deg": 91.0, "lon_deg": 0.0}"#;
        assert!(serde_json::from_str::<GeoPoint>(bad).is_err());
        let ok = r#"{"lat_deg": 1.0, "lon_deg": 2.0, "alt_m": 3.0}"#;
        assert_eq!(
            serde_json::from_str::<GeoPoint>(ok).unwrap(),
            GeoPoint::new(1.0, 2.0, Some(3.0)).unwrap()
        );
    }

    #[test]
    fn equatorial_degree() {
        let d = haversine_m(&p(0.0, 0.0), &p(0.0, 1.0));
        let expected = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M / 360.0;
        assert!((d - expected).abs() < 1e-6, "{d} vs {expected}");
    }

    #[test]
    fn antimeridian_short_way() {
        let d = haversine_m(&p(0.0, 179.5), &p(0.0, -179.5));
        assert!((d - 111_194.93).abs() < 1.0);
    }

    #[test]
    fn wrap_lon_cases() {
        assert_eq!(wrap_lon(181.0), -179.0);
        assert_eq!(wrap_lon(-180.0), 180.0);
        assert_eq!(wrap_lon(540.0), 180.0);
        assert_eq!(wrap_lon(10.0), 10.0);
    }

    #[test]
    fn offset_round_trip() {
        let o = GeoPoint::new(12.95, 77.66, Some(900.0)).unwrap();
        let q = offset_point(&o, 120.0, -45.0, 10.0);
        let [n, e, u] = local_offset_m(&o, &q);
        assert!((n - 120.0).abs() < 1e-6);
        assert!((e + 45.0).abs() < 1e-6);
        assert!((u - 10.0).abs() < 1e-9);
    }
}
