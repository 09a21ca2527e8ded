use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use uavforensics::geo::{haversine_m, EARTH_RADIUS_M};
use uavforensics::track::{max_tilt, speed_stats, tilt_deg, total_distance, TrackSample, Trajectory};
use uavforensics::ulog::{FieldDef, LogBuilder, ScalarType, Value};
use uavforensics::GeoPoint;

const DEG: f64 = std::f64::consts::PI / 180.0;

fn sample(t_us: u64, lat: f64, lon: f64, alt: f64) -> TrackSample {
    TrackSample {
        t_us,
        position: GeoPoint::new(lat, lon, Some(alt)).unwrap(),
        local_ned_m: None,
        velocity_mps: None,
        attitude_quat: None,
    }
}

/// Northbound track along a meridian; arc length maps linearly to latitude.
fn meridian_track(speed: f64, seconds: u64, hz: u64) -> Trajectory {
    let n = seconds * hz;
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64 / hz as f64;
            let lat = speed * t / EARTH_RADIUS_M / DEG;
            sample(i * 1_000_000 / hz, lat, 8.0, 500.0)
        })
        .collect();
    Trajectory::new(samples, "synthetic").unwrap()
}

fn qmul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Angle between world z and the body z axis, from the rotated vector.
fn tilt_by_rotation(q: [f64; 4]) -> f64 {
    let v = [0.0, 0.0, 0.0, 1.0];
    let conj = [q[0], -q[1], -q[2], -q[3]];
    let r = qmul(qmul(q, v), conj);
    let norm = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    (r[3] / norm).clamp(-1.0, 1.0).acos() / DEG
}

fn random_unit_quat(rng: &mut StdRng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 {
            return q.map(|c| c / n);
        }
    }
}

#[test]
fn straight_line_distance_is_speed_times_time() {
    let t = meridian_track(2.0, 100, 10);
    let d = total_distance(&t);
    assert!((d - 200.0).abs() / 200.0 < 1e-3, "{d}");
    assert!((t.duration_s() - 100.0).abs() < 1e-9);
}

#[test]
fn one_degree_equatorial_step() {
    let t = Trajectory::new(vec![sample(0, 0.0, 0.0, 10.0), sample(1_000_000, 0.0, 1.0, 10.0)], "synthetic").unwrap();
    let oracle = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M / 360.0;
    let d = total_distance(&t);
    assert!((d - 111_195.0).abs() / 111_195.0 < 5e-4, "{d}");
    assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
}

#[test]
fn identical_points_have_zero_distance() {
    let t = Trajectory::new(vec![sample(0, 47.0, 8.0, 10.0), sample(1, 47.0, 8.0, 10.0)], "synthetic").unwrap();
    assert_eq!(total_distance(&t), 0.0);
    let single = Trajectory::new(vec![sample(0, 47.0, 8.0, 10.0)], "synthetic").unwrap();
    assert_eq!(total_distance(&single), 0.0);
    assert_eq!(single.duration_s(), 0.0);
}

#[test]
fn haversine_symmetry_and_identity() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let p = GeoPoint::new(rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0), None).unwrap();
        let q = GeoPoint::new(rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0), None).unwrap();
        assert_eq!(haversine_m(&p, &p), 0.0);
        assert_eq!(haversine_m(&p, &q), haversine_m(&q, &p));
    }
}

#[test]
fn constant_horizontal_speed() {
    let t = meridian_track(5.06, 20, 10);
    let s = speed_stats(&t);
    assert!((s.max_mps - 5.06).abs() < 1e-6, "{}", s.max_mps);
    assert!(s.avg_mps <= s.max_mps);
}

#[test]
fn climb_then_descent_rates() {
    let mut samples = Vec::new();
    let mut alt = 500.0;
    for i in 0..=200u64 {
        let v_down = if i <= 100 { -2.8 } else { 1.25 };
        if i > 0 {
            alt -= v_down * 0.1;
        }
        let mut s = sample(i * 100_000, 47.0, 8.0, alt);
        s.velocity_mps = Some([0.0, 0.0, v_down]);
        samples.push(s);
    }
    let s = speed_stats(&Trajectory::new(samples, "synthetic").unwrap());
    assert!((s.max_up_mps - 2.8).abs() < 1e-6);
    assert!((s.max_down_mps - 1.25).abs() < 1e-6);
}

#[test]
fn hover_is_all_zero() {
    let samples = (0..50u64)
        .map(|i| {
            let mut s = sample(i * 100_000, 47.0, 8.0, 510.0);
            s.velocity_mps = Some([0.0; 3]);
            s
        })
        .collect();
    let s = speed_stats(&Trajectory::new(samples, "synthetic").unwrap());
    assert_eq!((s.avg_mps, s.max_mps, s.max_up_mps, s.max_down_mps), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn pitch_quaternion_tilt_is_exact() {
    for deg in [0.0, 5.0, 19.8, 30.0, 60.0, 89.0] {
        let h = deg * DEG / 2.0;
        let q = [h.cos(), 0.0, h.sin(), 0.0];
        assert!((tilt_deg(&q) - deg).abs() < 1e-9, "{deg}");
    }
    let h = 30.0 * DEG / 2.0;
    let mut s = sample(0, 47.0, 8.0, 500.0);
    s.attitude_quat = Some([h.cos(), 0.0, h.sin(), 0.0]);
    let t = Trajectory::new(vec![s], "synthetic").unwrap();
    assert!((max_tilt(&t).unwrap() - 30.0).abs() < 1e-9);
}

#[test]
fn no_attitude_means_no_tilt() {
    let t = meridian_track(1.0, 2, 10);
    assert!(max_tilt(&t).is_none());
}

#[test]
fn tilt_matches_rotated_body_axis_and_ignores_yaw() {
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..100 {
        let q = random_unit_quat(&mut rng);
        let tilt = tilt_deg(&q);
        assert!((tilt - tilt_by_rotation(q)).abs() < 1e-6, "{q:?}");
        let psi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let yaw = [(psi / 2.0).cos(), 0.0, 0.0, (psi / 2.0).sin()];
        let composed = qmul(yaw, q);
        assert!((tilt_deg(&composed) - tilt).abs() < 1e-9, "{q:?} {psi}");
    }
}

fn random_track(rng: &mut StdRng, n: usize) -> Vec<TrackSample> {
    let (mut lat, mut lon, mut alt) = (47.3977, 8.5456, 500.0);
    (0..n)
        .map(|i| {
            lat += rng.gen_range(-2e-5..2e-5);
            lon += rng.gen_range(-2e-5..2e-5);
            alt += rng.gen_range(-0.5..0.5);
            sample(i as u64 * 100_000, lat, lon, alt)
        })
        .collect()
}

#[test]
fn distance_is_time_reversal_invariant() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let fwd = random_track(&mut rng, 60);
        let last = fwd.last().unwrap().t_us;
        let rev: Vec<_> = fwd
            .iter()
            .rev()
            .map(|s| TrackSample { t_us: last - s.t_us, ..*s })
            .collect();
        let a = total_distance(&Trajectory::new(fwd, "synthetic").unwrap());
        let b = total_distance(&Trajectory::new(rev, "synthetic").unwrap());
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} {b}");
    }
}

#[test]
fn distance_is_additive_over_chunks() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let all = random_track(&mut rng, 90);
        let whole = total_distance(&Trajectory::new(all.clone(), "synthetic").unwrap());
        let cut = rng.gen_range(1..89);
        let a = total_distance(&Trajectory::new(all[..=cut].to_vec(), "synthetic").unwrap());
        let b = total_distance(&Trajectory::new(all[cut..].to_vec(), "synthetic").unwrap());
        assert!((whole - (a + b)).abs() <= 1e-9 * whole, "{whole} {a} {b}");
    }
}

#[test]
fn average_never_exceeds_max() {
    let mut rng = StdRng::seed_from_u64(19);
    for _ in 0..50 {
        let t = Trajectory::new(random_track(&mut rng, 40), "synthetic").unwrap();
        let s = speed_stats(&t);
        assert!(s.avg_mps <= s.max_mps + 1e-12, "{s:?}");
    }
}

fn gps_fields() -> Vec<FieldDef> {
    vec![
        FieldDef::scalar(ScalarType::UInt64, "timestamp"),
        FieldDef::scalar(ScalarType::Int32, "lat"),
        FieldDef::scalar(ScalarType::Int32, "lon"),
        FieldDef::scalar(ScalarType::Int32, "alt"),
    ]
}

#[test]
fn raw_gps_only_falls_back() {
    let mut b = LogBuilder::new(0).format("vehicle_gps_position", gps_fields());
    let g = b.subscribe("vehicle_gps_position", 0).unwrap();
    for i in 0..5u64 {
        b.push(&g, vec![Value::U64(1_000_000 * (i + 1)), Value::I32(473_977_420 + i as i32 * 10), Value::I32(85_455_940), Value::I32(488_000)]);
    }
    let t = uavforensics::track::build_trajectory(&b.build()).unwrap();
    assert_eq!(t.source_note, "gps-fallback");
    assert_eq!(t.len(), 5);
    assert!((t.samples[0].position.lat_deg - 47.397742).abs() < 1e-9);
    assert!((t.samples[0].position.alt_m.unwrap() - 488.0).abs() < 1e-9);
}

#[test]
fn log_without_position_is_an_error() {
    let mut b = LogBuilder::new(0).format(
        "vehicle_attitude",
        vec![FieldDef::scalar(ScalarType::UInt64, "timestamp"), FieldDef::array(ScalarType::Float, "q", 4)],
    );
    let a = b.subscribe("vehicle_attitude", 0).unwrap();
    b.push(&a, vec![Value::U64(5), Value::F32(1.0), Value::F32(0.0), Value::F32(0.0), Value::F32(0.0)]);
    assert!(uavforensics::track::build_trajectory(&b.build()).is_err());
}
