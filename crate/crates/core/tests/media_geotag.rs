use chrono::{Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use uavforensics::evidence::Sha256Hex;
use uavforensics::geo::distance_3d_m;
use uavforensics::media::{
    exif_capture_time, geotag, position_at, ClockAlignment, GeotagStatus, MediaEntry, MediaError, MediaManifest,
};
use uavforensics::synth;
use uavforensics::track::{build_trajectory, TrackSample, Trajectory};
use uavforensics::GeoPoint;

fn traj(points: &[(u64, f64, f64, f64)]) -> Trajectory {
    let s = points
        .iter()
        .map(|&(t, lat, lon, alt)| TrackSample {
            t_us: t,
            position: GeoPoint::new(lat, lon, Some(alt)).unwrap(),
            local_ned_m: None,
            velocity_mps: None,
            attitude_quat: None,
        })
        .collect();
    Trajectory::new(s, "synthetic").unwrap()
}

/// Eastbound at a constant rate: lon(t) = 8 + 1e-5 * t_s, 10 Hz samples.
fn analytic_track() -> Trajectory {
    let pts: Vec<_> = (0..=600u64).map(|i| (1_000_000 + i * 100_000, 47.0, 8.0 + 1e-6 * i as f64, 500.0)).collect();
    traj(&pts)
}

fn entry(name: &str, at: chrono::DateTime<Utc>) -> MediaEntry {
    MediaEntry { file_name: name.into(), capture_time: at, sha256: Sha256Hex::of_bytes(name.as_bytes()) }
}

fn epoch() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 14, 9, 0, 0).unwrap()
}

#[test]
fn midpoint_interpolation_is_exact() {
    let t = traj(&[(0, 0.0, 0.0, 0.0), (2_000_000, 0.001, 0.0, 10.0)]);
    let p = position_at(&t, 1_000_000).unwrap();
    assert!((p.lat_deg - 0.0005).abs() <= 1e-12);
    assert!(p.lon_deg.abs() <= 1e-12);
    assert!((p.alt_m.unwrap() - 5.0).abs() <= 1e-12);
}

#[test]
fn sample_hits_are_exact_and_outside_is_refused() {
    let t = analytic_track();
    for s in t.samples.iter().step_by(37) {
        assert_eq!(position_at(&t, s.t_us as i64).unwrap(), s.position);
    }
    match position_at(&t, 999_999) {
        Err(MediaError::OutOfRange { first_us, last_us, .. }) => {
            assert_eq!(first_us, 1_000_000);
            assert_eq!(last_us, 61_000_000);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn mid_flight_image_matches_analytic_position() {
    let t = analytic_track();
    let align = ClockAlignment { log_epoch_utc: epoch(), camera_offset_s: 0.0, source: "investigator".into() };
    let cap = epoch() + Duration::microseconds(23_456_789);
    let m = MediaManifest::new(vec![entry("a.jpg", cap)], vec![]).unwrap();
    let r = &geotag(&m, &t, &align)[0];
    assert_eq!(r.confidence, GeotagStatus::Interpolated);
    let expected_lon = 8.0 + 1e-6 * (23.456789 - 1.0) * 10.0;
    let p = r.position.unwrap();
    assert!((p.lon_deg - expected_lon).abs() < 1e-9, "{} {}", p.lon_deg, expected_lon);
    assert!((p.lat_deg - 47.0).abs() < 1e-9);
}

#[test]
fn pre_arming_image_is_out_of_flight() {
    let t = build_trajectory(&synth::reference_flight_log()).unwrap();
    let align = ClockAlignment { log_epoch_utc: synth::power_on_utc(), camera_offset_s: 0.0, source: "gps".into() };
    let m = MediaManifest::new(vec![entry("early.jpg", synth::power_on_utc() + Duration::seconds(300))], vec![]).unwrap();
    let r = geotag(&m, &t, &align);
    assert_eq!(r[0].confidence, GeotagStatus::OutOfFlight);
    assert!(r[0].position.is_none());
}

#[test]
fn empty_manifest_gives_empty_result() {
    let align = ClockAlignment { log_epoch_utc: epoch(), camera_offset_s: 0.0, source: "investigator".into() };
    assert!(geotag(&MediaManifest::default(), &analytic_track(), &align).is_empty());
}

#[test]
fn position_is_continuous() {
    let t = build_trajectory(&synth::reference_flight_log()).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let (a, b) = (t.samples[0].t_us as i64, t.samples.last().unwrap().t_us as i64);
    for _ in 0..50 {
        let t0 = rng.gen_range(a..b - 100_000);
        let mut prev = f64::INFINITY;
        for eps in [100_000i64, 10_000, 1_000, 100, 10, 1] {
            let d = distance_3d_m(&position_at(&t, t0).unwrap(), &position_at(&t, t0 + eps).unwrap());
            assert!(d <= prev + 1e-9);
            prev = d;
        }
        assert!(prev < 1e-3, "{prev}");
    }
}

#[test]
fn result_count_equals_entry_count_and_shift_invariance() {
    let t = analytic_track();
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.gen_range(0..20);
        let caps: Vec<_> = (0..n).map(|_| epoch() + Duration::microseconds(rng.gen_range(-5_000_000..70_000_000))).collect();
        let entries: Vec<_> = caps.iter().enumerate().map(|(i, c)| entry(&format!("IMG_{i:04}.jpg"), *c)).collect();
        let base = ClockAlignment { log_epoch_utc: epoch(), camera_offset_s: 0.0, source: "investigator".into() };
        let m = MediaManifest::new(entries.clone(), vec![]).unwrap();
        let r0 = geotag(&m, &t, &base);
        assert_eq!(r0.len(), n);

        let delta_s = rng.gen_range(-3600i64..3600);
        let shifted = MediaManifest::new(
            entries.iter().map(|e| MediaEntry { capture_time: e.capture_time + Duration::seconds(delta_s), ..e.clone() }).collect(),
            vec![],
        )
        .unwrap();
        let compensated = ClockAlignment { camera_offset_s: -(delta_s as f64), ..base.clone() };
        assert_eq!(geotag(&shifted, &t, &compensated), r0);
        let moved_epoch = ClockAlignment { log_epoch_utc: epoch() + Duration::seconds(delta_s), ..base };
        assert_eq!(geotag(&shifted, &t, &moved_epoch), r0);
    }
}

#[test]
fn recording_gap_refuses_interpolation() {
    let t = traj(&[(0, 47.0, 8.0, 500.0), (100_000, 47.0, 8.00001, 500.0), (5_000_000, 47.0, 8.001, 500.0)]);
    let align = ClockAlignment { log_epoch_utc: epoch(), camera_offset_s: 0.0, source: "investigator".into() };
    let m = MediaManifest::new(vec![entry("gap.jpg", epoch() + Duration::seconds(2))], vec![]).unwrap();
    let r = &geotag(&m, &t, &align)[0];
    assert_eq!(r.confidence, GeotagStatus::ExtrapolationRefused);
    assert!(r.position.is_none());
}

#[test]
fn exif_written_by_fixture_reads_back() {
    let at = Utc.with_ymd_and_hms(2023, 3, 14, 9, 9, 3).unwrap();
    assert_eq!(exif_capture_time(&synth::jpeg_with_exif(&at)).unwrap(), at);
}

#[test]
fn duplicate_names_are_rejected() {
    let e = entry("a.jpg", epoch());
    assert!(MediaManifest::new(vec![e.clone(), e], vec![]).is_err());
}
