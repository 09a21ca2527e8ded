//! Synthetic evidence reproducing the documented scenario at desk scale:
//! the pre-planned mission, a flight log matching the published flight
//! summary, the parameter snapshot, component inventory, battery reading and
//! a few camera images. Used by tests and for demonstrating the CLI.
//!
//! The real airfield coordinates are not available, so the mission is laid
//! out around the default simulator home position at airfield scale.

use std::fs;
use std::io::{self, Cursor};
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};

use crate::evidence::{ComponentKind, ComponentRecord};
use crate::geo::{offset_point, GeoPoint};
use crate::mission::{render_plan, MissionItem, MissionPlan};
use crate::params::render_qgc_params;
use crate::ulog::{
    encode_release, write_ulog, FieldDef, FlightLog, LogBuilder, ParamValue, ParameterSet,
    ScalarType, Value,
};

pub const HOME_LAT: f64 = 47.397742;
pub const HOME_LON: f64 = 8.545594;
pub const HOME_ALT_M: f64 = 488.0;

/// Power-on time of the synthetic flight, used for the GPS UTC field.
pub fn power_on_utc() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 14, 9, 0, 0).unwrap()
}

pub const ARMING_OFFSET_US: u64 = 481_000_000;
pub const SAMPLE_INTERVAL_US: u64 = 100_000;

pub fn home() -> GeoPoint {
    GeoPoint::new(HOME_LAT, HOME_LON, Some(HOME_ALT_M)).unwrap()
}

fn at(north: f64, east: f64, rel_alt: f64) -> GeoPoint {
    let p = offset_point(&home(), north, east, 0.0);
    GeoPoint::new(p.lat_deg, p.lon_deg, Some(rel_alt)).unwrap()
}

/// Local (north, east) of each spatial mission item, by sequence number.
pub const WAYPOINTS_NE: [(u32, f64, f64); 8] = [
    (0, 0.0, 0.0),
    (1, 0.0, 75.9),
    (3, 40.0, 75.9),
    (5, 40.0, 35.9),
    (6, 70.0, 35.9),
    (7, 70.0, 65.9),
    (8, 100.0, 65.9),
    (9, 100.0, 15.9),
];

/// Takeoff to 10 m, 5 m/s to the runway end, 2 m/s afterwards, heading 180
/// with 5 s holds along the tarmac edge, then return to launch.
pub fn reference_mission() -> MissionPlan {
    let wp = |seq: u32| {
        let (_, n, e) = WAYPOINTS_NE.iter().find(|w| w.0 == seq).copied().unwrap();
        at(n, e, 10.0)
    };
    let items = vec![
        MissionItem::takeoff(0, wp(0)),
        MissionItem::waypoint(1, wp(1), None, None),
        MissionItem::change_speed(2, 2.0),
        MissionItem::waypoint(3, wp(3), None, None),
        MissionItem::condition_yaw(4, 180.0),
        MissionItem::waypoint(5, wp(5), Some(5.0), Some(180.0)),
        MissionItem::waypoint(6, wp(6), Some(5.0), Some(180.0)),
        MissionItem::loiter_time(7, Some(wp(7)), 5.0),
        MissionItem::waypoint(8, wp(8), Some(5.0), Some(180.0)),
        MissionItem::waypoint(9, wp(9), Some(5.0), Some(180.0)),
        MissionItem::return_to_launch(10),
    ];
    let mut plan = MissionPlan::new(Some(home()), items).expect("fixture plan is valid");
    plan.cruise_speed_mps = Some(5.0);
    plan
}

/// Piecewise-constant NED velocity legs `(duration_s, [vn, ve, vd])`.
///
/// Totals: 146 s, 295.1 m, peak 5.06 m/s, climb 2.8 m/s, descent 1.25 m/s.
/// The path follows the mission and stops 16 m short of item 10, then
/// descends.
pub const FLIGHT_LEGS: [(f64, [f64; 3]); 14] = [
    (2.5, [0.0, 0.0, -2.8]),
    (2.5, [0.0, 0.0, -1.28]),
    (15.0, [0.0, 5.06, 0.0]),
    (20.0, [2.0, 0.0, 0.0]),
    (20.0, [0.0, -2.0, 0.0]),
    (5.0, [0.0, 0.0, 0.0]),
    (15.0, [2.0, 0.0, 0.0]),
    (5.0, [0.0, 0.0, 0.0]),
    (15.0, [0.0, 2.0, 0.0]),
    (5.0, [0.0, 0.0, 0.0]),
    (15.0, [2.0, 0.0, 0.0]),
    (5.0, [0.0, 0.0, 0.0]),
    (17.0, [0.0, -2.0, 0.0]),
    (4.0, [0.0, 0.0, 1.25]),
];

/// Constructed maximum tilt, reached once just after the climb.
pub const MAX_TILT_DEG: f64 = 19.8;

#[derive(Debug, Clone, Copy)]
pub struct FlightState {
    pub t_us: u64,
    pub ned: [f64; 3],
    pub vel: [f64; 3],
    pub quat: [f64; 4],
}

/// Quaternion for yaw `psi` followed by pitch `theta` (radians).
pub fn yaw_pitch_quat(psi: f64, theta: f64) -> [f64; 4] {
    let (sp, cp) = (psi / 2.0).sin_cos();
    let (st, ct) = (theta / 2.0).sin_cos();
    [cp * ct, -sp * st, cp * st, sp * ct]
}

/// Samples the flight legs every [`SAMPLE_INTERVAL_US`] starting at
/// [`ARMING_OFFSET_US`].
pub fn flight_states() -> Vec<FlightState> {
    let total_s: f64 = FLIGHT_LEGS.iter().map(|l| l.0).sum();
    let n = (total_s * 1e6 / SAMPLE_INTERVAL_US as f64).round() as u64;
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut heading = 0.0_f64;
    for k in 0..=n {
        let t = k as f64 * SAMPLE_INTERVAL_US as f64 / 1e6;
        let mut ned = [0.0; 3];
        let mut vel = [0.0; 3];
        let mut start = 0.0;
        for (dur, v) in FLIGHT_LEGS {
            let end = start + dur;
            let dt = (t.min(end) - start).max(0.0);
            for i in 0..3 {
                ned[i] += v[i] * dt;
            }
            if t >= start && (t < end || end >= total_s - 1e-9) {
                vel = v;
            }
            start = end;
        }
        let horiz = vel[0].hypot(vel[1]);
        if horiz > 0.0 {
            heading = vel[1].atan2(vel[0]);
        }
        let tilt = if k == 50 {
            MAX_TILT_DEG
        } else if horiz > 3.0 {
            12.0
        } else if horiz > 0.0 {
            5.0
        } else {
            0.0
        };
        out.push(FlightState {
            t_us: ARMING_OFFSET_US + k * SAMPLE_INTERVAL_US,
            ned,
            vel,
            quat: yaw_pitch_quat(heading, tilt.to_radians()),
        });
    }
    out
}

/// Parameter snapshot with the failsafe and configuration values of the
/// documented aircraft, plus a few battery parameters no rule refers to.
pub fn reference_parameters() -> ParameterSet {
    use ParamValue::{Float32 as F, Int32 as I};
    ParameterSet::from_initial([
        ("BAT1_CAPACITY", F(6500.0)),
        ("BAT1_N_CELLS", I(4)),
        ("BAT_LOW_THR", F(0.15)),
        ("COM_ARM_MIS_REQ", I(0)),
        ("COM_ARM_WO_GPS", I(1)),
        ("COM_FLTMODE1", I(8)),
        ("COM_FLTMODE4", I(1)),
        ("COM_FLTMODE6", I(3)),
        ("COM_LOW_BAT_ACT", I(0)),
        ("COM_OBS_AVOID", I(0)),
        ("COM_RC_LOSS_T", F(2.0)),
        ("FD_ESCS_EN", I(1)),
        ("GF_ACTION", I(0)),
        ("GPS_1_GNSS", I(0)),
        ("GPS_1_PROTOCOL", I(1)),
        ("MAV_TYPE", I(2)),
        ("MIS_LTRMIN_ALT", F(10.0)),
        ("MPC_LAND_SPEED", F(0.7)),
        ("MPC_TILTMAX_AIR", F(45.0)),
        ("MPC_TKO_SPEED", F(1.5)),
        ("MPC_XY_CRUISE", F(5.0)),
        ("MPC_Z_VEL_MAX_DN", F(1.0)),
        ("MPC_Z_VEL_MAX_UP", F(3.0)),
        ("NAV_DLL_ACT", I(0)),
        ("NAV_RCL_ACT", I(2)),
        ("PWM_AUX_RATE", I(50)),
        ("RTL_LAND_DELAY", F(0.0)),
        ("RTL_RETURN_ALT", F(30.0)),
        ("SDLOG_BOOT_BAT", I(0)),
        ("SDLOG_MODE", I(0)),
        ("SYS_AUTOCONFIG", I(0)),
        ("SYS_MC_EST_GROUP", I(2)),
    ])
}

fn f32v(x: f64) -> Value {
    Value::F32(x as f32)
}

/// Flight log with fused local/global position, attitude and a 1 Hz GPS
/// topic carrying UTC time.
pub fn reference_flight_log() -> FlightLog {
    use ScalarType::*;
    let ts = || FieldDef::scalar(UInt64, "timestamp");
    let f = |n: &str| FieldDef::scalar(Float, n);
    let mut b = LogBuilder::new(ARMING_OFFSET_US - 10_000)
        .info_str("sys_name", "PX4")
        .info_str("ver_hw", "CUBEPILOT_CUBEORANGE")
        .info_str("sys_os_name", "NuttX")
        .info_u32("sys_os_ver_release", encode_release(11, 0, 0, 255))
        .info_str("ver_sw_release_str", "v1.13.2")
        .format(
            "vehicle_local_position",
            vec![
                ts(),
                f("x"),
                f("y"),
                f("z"),
                f("vx"),
                f("vy"),
                f("vz"),
                FieldDef::scalar(Double, "ref_lat"),
                FieldDef::scalar(Double, "ref_lon"),
                f("ref_alt"),
                FieldDef::scalar(Bool, "xy_valid"),
                FieldDef::scalar(Bool, "z_valid"),
                FieldDef::array(UInt8, "_padding0", 2),
            ],
        )
        .format(
            "vehicle_global_position",
            vec![
                ts(),
                FieldDef::scalar(Double, "lat"),
                FieldDef::scalar(Double, "lon"),
                f("alt"),
                f("eph"),
            ],
        )
        .format("vehicle_attitude", vec![ts(), FieldDef::array(Float, "q", 4)])
        .format(
            "vehicle_gps_position",
            vec![
                ts(),
                FieldDef::scalar(UInt64, "time_utc_usec"),
                FieldDef::scalar(Int32, "lat"),
                FieldDef::scalar(Int32, "lon"),
                FieldDef::scalar(Int32, "alt"),
                f("vel_n_m_s"),
                f("vel_e_m_s"),
                f("vel_d_m_s"),
                FieldDef::scalar(UInt8, "fix_type"),
                FieldDef::scalar(UInt8, "satellites_used"),
            ],
        );
    for (name, value) in &reference_parameters().initial {
        b = b.param(name, *value);
    }
    let lp = b.subscribe("vehicle_local_position", 0).expect("format exists");
    let gp = b.subscribe("vehicle_global_position", 0).expect("format exists");
    let att = b.subscribe("vehicle_attitude", 0).expect("format exists");
    let gps = b.subscribe("vehicle_gps_position", 0).expect("format exists");
    let h = home();
    let epoch_us = power_on_utc().timestamp_micros() as u64;
    for (k, s) in flight_states().iter().enumerate() {
        let [n, e, d] = s.ned;
        let [vn, ve, vd] = s.vel;
        let p = offset_point(&h, n, e, -d);
        b.push(
            &lp,
            vec![
                Value::U64(s.t_us),
                f32v(n),
                f32v(e),
                f32v(d),
                f32v(vn),
                f32v(ve),
                f32v(vd),
                Value::F64(h.lat_deg),
                Value::F64(h.lon_deg),
                f32v(HOME_ALT_M),
                Value::Bool(true),
                Value::Bool(true),
            ],
        );
        b.push(
            &gp,
            vec![
                Value::U64(s.t_us),
                Value::F64(p.lat_deg),
                Value::F64(p.lon_deg),
                f32v(HOME_ALT_M - d),
                f32v(0.8),
            ],
        );
        b.push(
            &att,
            vec![Value::U64(s.t_us), f32v(s.quat[0]), f32v(s.quat[1]), f32v(s.quat[2]), f32v(s.quat[3])],
        );
        if k % 10 == 0 {
            b.push(
                &gps,
                vec![
                    Value::U64(s.t_us),
                    Value::U64(epoch_us + s.t_us),
                    Value::I32((p.lat_deg * 1e7).round() as i32),
                    Value::I32((p.lon_deg * 1e7).round() as i32),
                    Value::I32(((HOME_ALT_M - d) * 1e3).round() as i32),
                    f32v(vn),
                    f32v(ve),
                    f32v(vd),
                    Value::U8(3),
                    Value::U8(14),
                ],
            );
        }
    }
    b.text(ARMING_OFFSET_US, b'6', "Armed by RC")
        .text(ARMING_OFFSET_US + 5_000_000, b'6', "Takeoff detected")
        .text(ARMING_OFFSET_US + 20_000_000, b'6', "Mission speed changed")
        .build()
}

pub fn reference_components() -> Vec<ComponentRecord> {
    let c = |component, description: &str| ComponentRecord {
        component,
        description: description.into(),
        serial_number: None,
        mass_g: None,
        dimension_cm: None,
    };
    vec![
        c(ComponentKind::Frame, "Custom carbon fibre frame, X quadrotor configuration"),
        c(ComponentKind::Motor, "KDE 2814XF 775KV (x4)"),
        c(ComponentKind::Esc, "KDEXF-UAS35 (x4)"),
        c(ComponentKind::Propeller, "12x6 hard plastic"),
        c(ComponentKind::Battery, "LiPo 4s 6500mAh"),
        c(ComponentKind::Autopilot, "Pixhawk Cube Orange"),
        c(ComponentKind::Gps, "Here2 GPS"),
        c(ComponentKind::RadioReceiver, "FrSky X8R long range receiver"),
        c(ComponentKind::Telemetry, "RFD900"),
        c(ComponentKind::Camera, "SJCAM SJ4000 HD camera"),
        ComponentRecord {
            mass_g: Some(2360.0),
            dimension_cm: Some(60.0),
            ..c(ComponentKind::Other, "Complete aircraft as recovered")
        },
    ]
}

pub const BATTERY_JSON: &str = r#"{
  "battery": {
    "cell_count": 4,
    "capacity_mah": 6500.0,
    "full_voltage_v": 16.8,
    "empty_voltage_v": 13.55
  },
  "observation": {
    "observed_voltage_v": 16.2
  },
  "power_model": {
    "per_motor_cruise_w": 94.0,
    "motor_count": 4,
    "avionics_w": 5.0,
    "cruise_speed_mps": 2.0
  },
  "notes": "Voltage measured at recovery; per-motor power from thrust bench at cruise."
}
"#;

/// Minimal JPEG carrying only an EXIF segment with the given capture time.
pub fn jpeg_with_exif(capture: &DateTime<Utc>) -> Vec<u8> {
    use exif::experimental::Writer;
    use exif::{Field, In, Tag, Value as EValue};
    let stamp = capture.format("%Y:%m:%d %H:%M:%S").to_string();
    let fields = [
        Field {
            tag: Tag::Make,
            ifd_num: In::PRIMARY,
            value: EValue::Ascii(vec![b"SJCAM".to_vec()]),
        },
        Field {
            tag: Tag::DateTimeOriginal,
            ifd_num: In::PRIMARY,
            value: EValue::Ascii(vec![stamp.into_bytes()]),
        },
    ];
    let mut w = Writer::new();
    for f in &fields {
        w.push_field(f);
    }
    let mut tiff = Cursor::new(Vec::new());
    w.write(&mut tiff, false).expect("in-memory EXIF write");
    let tiff = tiff.into_inner();
    let mut out = vec![0xFF, 0xD8, 0xFF, 0xE1];
    out.extend_from_slice(&((tiff.len() + 8) as u16).to_be_bytes());
    out.extend_from_slice(b"Exif\0\0");
    out.extend_from_slice(&tiff);
    out.extend_from_slice(&[0xFF, 0xD9]);
    out
}

/// Capture times (log seconds since power-on) of the fixture images: one
/// before arming, one mid-flight during a hold, one late in the flight.
pub const IMAGE_LOG_TIMES_S: [(&str, u64); 3] = [
    ("IMG_0001.jpg", 300),
    ("IMG_0002.jpg", 543),
    ("IMG_0003.jpg", 620),
];

/// Writes a complete case directory reproducing the scenario.
pub fn write_reference_case(dir: &Path) -> io::Result<()> {
    let put = |rel: &str, bytes: &[u8]| -> io::Result<()> {
        let p = dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(p, bytes)
    };
    let log = write_ulog(&reference_flight_log()).map_err(|e| io::Error::other(e.to_string()))?;
    put("flight_log/flight.ulg", &log)?;
    put("mission_plan/mission.plan", &render_plan(&reference_mission()))?;
    put("parameter_dump/vehicle.params", render_qgc_params(&reference_parameters()).as_bytes())?;
    put("battery_observation/battery.json", BATTERY_JSON.as_bytes())?;
    let mut comps = serde_json::to_vec_pretty(&reference_components()).expect("serialising components");
    comps.push(b'\n');
    put("component_record/components.json", &comps)?;
    for (name, t) in IMAGE_LOG_TIMES_S {
        let capture = power_on_utc() + chrono::Duration::seconds(t as i64);
        put(&format!("media_manifest/{name}"), &jpeg_with_exif(&capture))?;
    }
    put("media_manifest/IMG_0004.jpg", b"\xFF\xD8\xFF\xD9")?;
    Ok(())
}
