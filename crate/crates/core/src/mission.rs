//! Pre-planned mission decoding (ground-station `.plan` documents) and
//! comparison of planned waypoints against the flown trajectory.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geo::{distance_3d_m, local_offset_m, GeoPoint};
use crate::track::Trajectory;

pub const DEFAULT_REACH_RADIUS_M: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("plan JSON syntax at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("plan field {path}: {msg}")]
    Field { path: String, msg: String },
    #[error("cannot compare plan: {0}")]
    Compare(String),
}

fn field_err(path: impl Into<String>, msg: impl Into<String>) -> MissionError {
    MissionError::Field {
        path: path.into(),
        msg: msg.into(),
    }
}

/// MAVLink coordinate frame of a mission item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// MAV_FRAME_GLOBAL (0), altitude above mean sea level.
    GlobalAmsl,
    /// MAV_FRAME_LOCAL_NED (1).
    Local,
    /// MAV_FRAME_GLOBAL_RELATIVE_ALT (3), altitude above home.
    GlobalRelativeAlt,
    Other(u8),
}

impl Frame {
    pub fn from_code(c: u8) -> Self {
        match c {
            0 => Frame::GlobalAmsl,
            1 => Frame::Local,
            3 => Frame::GlobalRelativeAlt,
            n => Frame::Other(n),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Frame::GlobalAmsl => 0,
            Frame::Local => 1,
            Frame::GlobalRelativeAlt => 3,
            Frame::Other(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionCommand {
    Takeoff,
    Waypoint,
    ChangeSpeed,
    ConditionYaw,
    LoiterTime,
    ReturnToLaunch,
    Land,
    Other(u16),
}

impl MissionCommand {
    pub fn from_code(c: u16) -> Self {
        match c {
            16 => MissionCommand::Waypoint,
            19 => MissionCommand::LoiterTime,
            20 => MissionCommand::ReturnToLaunch,
            21 => MissionCommand::Land,
            22 => MissionCommand::Takeoff,
            115 => MissionCommand::ConditionYaw,
            178 => MissionCommand::ChangeSpeed,
            n => MissionCommand::Other(n),
        }
    }

    pub fn code(self) -> u16 {
        match self {
            MissionCommand::Waypoint => 16,
            MissionCommand::LoiterTime => 19,
            MissionCommand::ReturnToLaunch => 20,
            MissionCommand::Land => 21,
            MissionCommand::Takeoff => 22,
            MissionCommand::ConditionYaw => 115,
            MissionCommand::ChangeSpeed => 178,
            MissionCommand::Other(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionItem {
    pub seq: u32,
    pub command: MissionCommand,
    pub frame: Frame,
    /// Altitude is in the item's own frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
    /// Raw `param1..param7` for commands without a dedicated mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_params: Option<[Option<f64>; 7]>,
}

impl MissionItem {
    fn bare(seq: u32, command: MissionCommand, frame: Frame) -> Self {
        MissionItem {
            seq,
            command,
            frame,
            coordinate: None,
            hold_s: None,
            speed_mps: None,
            yaw_deg: None,
            raw_params: None,
        }
    }

    pub fn takeoff(seq: u32, at: GeoPoint) -> Self {
        MissionItem {
            coordinate: Some(at),
            ..Self::bare(seq, MissionCommand::Takeoff, Frame::GlobalRelativeAlt)
        }
    }

    pub fn waypoint(seq: u32, at: GeoPoint, hold_s: Option<f64>, yaw_deg: Option<f64>) -> Self {
        MissionItem {
            coordinate: Some(at),
            hold_s,
            yaw_deg,
            ..Self::bare(seq, MissionCommand::Waypoint, Frame::GlobalRelativeAlt)
        }
    }

    pub fn change_speed(seq: u32, speed_mps: f64) -> Self {
        MissionItem {
            speed_mps: Some(speed_mps),
            ..Self::bare(seq, MissionCommand::ChangeSpeed, Frame::Other(2))
        }
    }

    pub fn condition_yaw(seq: u32, yaw_deg: f64) -> Self {
        MissionItem {
            yaw_deg: Some(yaw_deg),
            ..Self::bare(seq, MissionCommand::ConditionYaw, Frame::Other(2))
        }
    }

    pub fn loiter_time(seq: u32, at: Option<GeoPoint>, hold_s: f64) -> Self {
        MissionItem {
            coordinate: at,
            hold_s: Some(hold_s),
            ..Self::bare(seq, MissionCommand::LoiterTime, Frame::GlobalRelativeAlt)
        }
    }

    pub fn return_to_launch(seq: u32) -> Self {
        Self::bare(seq, MissionCommand::ReturnToLaunch, Frame::Other(2))
    }

    pub fn land(seq: u32, at: GeoPoint) -> Self {
        MissionItem {
            coordinate: Some(at),
            ..Self::bare(seq, MissionCommand::Land, Frame::GlobalRelativeAlt)
        }
    }

    /// One-based item number as shown by ground-station software.
    pub fn number(&self) -> u32 {
        self.seq + 1
    }

    fn validate(&self, path: &str) -> Result<(), MissionError> {
        use MissionCommand::*;
        match self.command {
            Takeoff | Waypoint if self.coordinate.is_none() => {
                Err(field_err(format!("{path}.params"), "takeoff/waypoint needs a coordinate"))
            }
            ChangeSpeed if !self.speed_mps.is_some_and(|v| v > 0.0) => {
                Err(field_err(format!("{path}.params[1]"), "change_speed needs a speed > 0"))
            }
            LoiterTime if !self.hold_s.is_some_and(|v| v >= 0.0) => {
                Err(field_err(format!("{path}.params[0]"), "loiter_time needs a hold time >= 0"))
            }
            ConditionYaw if self.yaw_deg.is_none() => {
                Err(field_err(format!("{path}.params[0]"), "condition_yaw needs an angle"))
            }
            _ => match self.yaw_deg {
                Some(y) if !(0.0..360.0).contains(&y) => {
                    Err(field_err(format!("{path}.params"), format!("yaw {y} outside [0, 360)")))
                }
                _ => Ok(()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<GeoPoint>,
    pub items: Vec<MissionItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cruise_speed_mps: Option<f64>,
    /// Geofence shapes present in the document (not decoded).
    #[serde(default)]
    pub geofence_shapes: usize,
    #[serde(default)]
    pub rally_points: usize,
}

impl MissionPlan {
    pub fn new(home: Option<GeoPoint>, items: Vec<MissionItem>) -> Result<Self, MissionError> {
        for (i, it) in items.iter().enumerate() {
            if it.seq as usize != i {
                return Err(field_err(
                    format!("mission.items[{i}]"),
                    format!("sequence number {} where {i} expected", it.seq),
                ));
            }
            it.validate(&format!("mission.items[{i}]"))?;
        }
        Ok(MissionPlan {
            home,
            items,
            cruise_speed_mps: None,
            geofence_shapes: 0,
            rally_points: 0,
        })
    }

    /// Item coordinate with altitude converted to AMSL when the home
    /// altitude is known.
    pub fn resolved(&self, item: &MissionItem) -> Option<GeoPoint> {
        let c = item.coordinate?;
        let home_alt = self.home.and_then(|h| h.alt_m);
        let alt = match (item.frame, c.alt_m, home_alt) {
            (Frame::GlobalRelativeAlt, Some(a), Some(h)) => Some(a + h),
            (_, a, _) => a,
        };
        Some(GeoPoint { alt_m: alt, ..c })
    }
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, MissionError> {
    obj.get(key)
        .ok_or_else(|| field_err(format!("{path}.{key}"), "missing"))
}

fn as_obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, MissionError> {
    v.as_object().ok_or_else(|| field_err(path, "expected an object"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, MissionError> {
    v.as_f64().ok_or_else(|| field_err(path, "expected a number"))
}

fn opt_number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<f64>, MissionError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_f64(v, &format!("{path}.{key}")).map(Some),
    }
}

fn count(v: Option<&Value>, key: &str) -> usize {
    v.and_then(|v| v.get(key))
        .and_then(Value::as_array)
        .map_or(0, Vec::len)
}

fn parse_item(seq: u32, v: &Value, path: &str) -> Result<MissionItem, MissionError> {
    let obj = as_obj(v, path)?;
    let ty = get(obj, "type", path)?.as_str().unwrap_or_default();
    if ty != "SimpleItem" {
        return Err(field_err(format!("{path}.type"), format!("unsupported item type {ty:?}")));
    }
    let code = get(obj, "command", path)?
        .as_u64()
        .and_then(|c| u16::try_from(c).ok())
        .ok_or_else(|| field_err(format!("{path}.command"), "expected a command number"))?;
    let frame = match obj.get("frame") {
        None => Frame::GlobalRelativeAlt,
        Some(f) => Frame::from_code(
            f.as_u64()
                .and_then(|c| u8::try_from(c).ok())
                .ok_or_else(|| field_err(format!("{path}.frame"), "expected a frame number"))?,
        ),
    };
    let params_v = get(obj, "params", path)?
        .as_array()
        .ok_or_else(|| field_err(format!("{path}.params"), "expected an array"))?;
    if params_v.len() != 7 {
        return Err(field_err(
            format!("{path}.params"),
            format!("expected 7 entries, found {}", params_v.len()),
        ));
    }
    let mut p = [None; 7];
    for (i, v) in params_v.iter().enumerate() {
        p[i] = match v {
            Value::Null => None,
            v => Some(as_f64(v, &format!("{path}.params[{i}]"))?),
        };
    }
    let command = MissionCommand::from_code(code);
    let coordinate = match (p[4], p[5]) {
        (Some(lat), Some(lon)) if !(lat == 0.0 && lon == 0.0) => Some(
            GeoPoint::new(lat, lon, p[6])
                .map_err(|e| field_err(format!("{path}.params"), e.to_string()))?,
        ),
        _ => None,
    };
    let yaw = |v: Option<f64>| v.map(|y| y.rem_euclid(360.0));
    let mut item = MissionItem::bare(seq, command, frame);
    match command {
        MissionCommand::Takeoff | MissionCommand::Land => {
            item.coordinate = coordinate;
            item.yaw_deg = yaw(p[3]);
        }
        MissionCommand::Waypoint => {
            item.coordinate = coordinate;
            item.hold_s = p[0].filter(|h| *h > 0.0);
            item.yaw_deg = yaw(p[3]);
        }
        MissionCommand::LoiterTime => {
            item.coordinate = coordinate;
            item.hold_s = p[0];
        }
        MissionCommand::ChangeSpeed => item.speed_mps = p[1],
        MissionCommand::ConditionYaw => item.yaw_deg = yaw(p[0]),
        MissionCommand::ReturnToLaunch => {}
        MissionCommand::Other(_) => {
            item.coordinate = coordinate;
            item.raw_params = Some(p);
        }
    }
    item.validate(path)?;
    Ok(item)
}

/// Decodes a ground-station `.plan` JSON document.
pub fn parse_plan(bytes: &[u8]) -> Result<MissionPlan, MissionError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| MissionError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let root = as_obj(&doc, "$")?;
    let mission = as_obj(get(root, "mission", "$")?, "mission")?;
    let home = match mission.get("plannedHomePosition") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let path = "mission.plannedHomePosition";
            let a = v
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| field_err(path, "expected [lat, lon, alt]"))?;
            let n = |i: usize| as_f64(&a[i], &format!("{path}[{i}]"));
            Some(GeoPoint::new(n(0)?, n(1)?, Some(n(2)?)).map_err(|e| field_err(path, e.to_string()))?)
        }
    };
    let items_v = get(mission, "items", "mission")?
        .as_array()
        .ok_or_else(|| field_err("mission.items", "expected an array"))?;
    let items = items_v
        .iter()
        .enumerate()
        .map(|(i, v)| parse_item(i as u32, v, &format!("mission.items[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let fixed_wing = mission.get("vehicleType").and_then(Value::as_u64) == Some(1);
    let speed_key = if fixed_wing { "cruiseSpeed" } else { "hoverSpeed" };
    let cruise = opt_number(mission, speed_key, "mission")?.filter(|v| *v > 0.0);
    Ok(MissionPlan {
        home,
        items,
        cruise_speed_mps: cruise,
        geofence_shapes: count(root.get("geoFence"), "polygons") + count(root.get("geoFence"), "circles"),
        rally_points: count(root.get("rallyPoints"), "points"),
    })
}

fn item_params(it: &MissionItem) -> [Option<f64>; 7] {
    if let Some(raw) = it.raw_params {
        return raw;
    }
    let mut p = [Some(0.0); 7];
    match it.command {
        MissionCommand::Waypoint => {
            p[0] = Some(it.hold_s.unwrap_or(0.0));
            p[3] = it.yaw_deg;
        }
        MissionCommand::Takeoff | MissionCommand::Land => p[3] = it.yaw_deg,
        MissionCommand::LoiterTime => p[0] = it.hold_s,
        MissionCommand::ChangeSpeed => {
            p[0] = Some(1.0);
            p[1] = it.speed_mps;
            p[2] = Some(-1.0);
        }
        MissionCommand::ConditionYaw => p[0] = it.yaw_deg,
        _ => {}
    }
    if let Some(c) = it.coordinate {
        p[4] = Some(c.lat_deg);
        p[5] = Some(c.lon_deg);
        p[6] = Some(c.alt_m.unwrap_or(0.0));
    }
    p
}

/// Renders a plan as a `.plan` document accepted by [`parse_plan`].
pub fn render_plan(plan: &MissionPlan) -> Vec<u8> {
    let items: Vec<Value> = plan
        .items
        .iter()
        .map(|it| {
            json!({
                "type": "SimpleItem",
                "autoContinue": true,
                "command": it.command.code(),
                "doJumpId": it.seq + 1,
                "frame": it.frame.code(),
                "params": item_params(it),
            })
        })
        .collect();
    let mut mission = json!({
        "version": 2,
        "firmwareType": 12,
        "vehicleType": 2,
        "items": items,
    });
    if let Some(h) = plan.home {
        mission["plannedHomePosition"] = json!([h.lat_deg, h.lon_deg, h.alt_m.unwrap_or(0.0)]);
    }
    if let Some(v) = plan.cruise_speed_mps {
        mission["hoverSpeed"] = json!(v);
    }
    let doc = json!({
        "fileType": "Plan",
        "version": 1,
        "groundStation": "uavforensics",
        "mission": mission,
        "geoFence": {"version": 2, "polygons": [], "circles": []},
        "rallyPoints": {"version": 2, "points": []},
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("serialising a JSON value");
    out.push(b'\n');
    out
}

/// Coordinates of every item that has one, in sequence, altitude resolved
/// to AMSL where possible.
pub fn planned_path(plan: &MissionPlan) -> Vec<GeoPoint> {
    plan.items.iter().filter_map(|it| plan.resolved(it)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub narrative: Vec<String>,
    pub polyline: Vec<GeoPoint>,
    pub item_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<GeoPoint>,
}

fn fmt_num(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    format!("{r}")
}

fn fmt_at(it: &MissionItem) -> String {
    match it.coordinate {
        Some(c) => {
            let alt = c
                .alt_m
                .map(|a| {
                    let frame = match it.frame {
                        Frame::GlobalRelativeAlt => " above home",
                        Frame::GlobalAmsl => " AMSL",
                        _ => "",
                    };
                    format!(", {} m{frame}", fmt_num(a))
                })
                .unwrap_or_default();
            format!(" at {:.7}, {:.7}{alt}", c.lat_deg, c.lon_deg)
        }
        None => String::new(),
    }
}

fn describe(it: &MissionItem) -> String {
    let at = fmt_at(it);
    let extras = |s: &mut String| {
        if let Some(h) = it.hold_s {
            s.push_str(&format!(", hold {} s", fmt_num(h)));
        }
        if let Some(y) = it.yaw_deg {
            s.push_str(&format!(", heading {}°", fmt_num(y)));
        }
    };
    let mut s = match it.command {
        MissionCommand::Takeoff => {
            let alt = it.coordinate.and_then(|c| c.alt_m).map(fmt_num).unwrap_or_else(|| "?".into());
            format!("takeoff to {alt} m{at}")
        }
        MissionCommand::Waypoint => format!("waypoint{at}"),
        MissionCommand::ChangeSpeed => {
            format!("change speed to {} m/s", fmt_num(it.speed_mps.unwrap_or(0.0)))
        }
        MissionCommand::ConditionYaw => {
            format!("turn to heading {}°", fmt_num(it.yaw_deg.unwrap_or(0.0)))
        }
        MissionCommand::LoiterTime => format!("loiter{at}"),
        MissionCommand::ReturnToLaunch => "return to launch".into(),
        MissionCommand::Land => format!("land{at}"),
        MissionCommand::Other(c) => format!("command {c}{at}"),
    };
    match it.command {
        MissionCommand::Waypoint | MissionCommand::LoiterTime => extras(&mut s),
        _ => {}
    }
    format!("{}. {s}", it.number())
}

/// Item-by-item narrative and the planned path polyline.
pub fn mission_summary(plan: &MissionPlan) -> MissionSummary {
    let narrative = if plan.items.is_empty() {
        vec!["no mission items".to_string()]
    } else {
        plan.items.iter().map(describe).collect()
    };
    MissionSummary {
        narrative,
        polyline: planned_path(plan),
        item_count: plan.items.len(),
        home: plan.home,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointDeviation {
    pub seq: u32,
    pub planned: GeoPoint,
    pub closest_approach_m: f64,
    pub time_of_closest_approach_us: u64,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDeviation {
    pub reach_radius_m: f64,
    pub waypoints: Vec<WaypointDeviation>,
    pub unreached: Vec<u32>,
    pub completed_rtl: bool,
    pub notes: Vec<String>,
}

/// Closest point of segment `a -> b` to `target`, as (fraction, distance).
fn closest_on_segment(target: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> (f64, GeoPoint) {
    let pa = local_offset_m(target, a);
    let pb = local_offset_m(target, b);
    let d: Vec<f64> = (0..3).map(|i| pb[i] - pa[i]).collect();
    let len2: f64 = d.iter().map(|x| x * x).sum();
    let u = if len2 > 0.0 {
        (-(0..3).map(|i| pa[i] * d[i]).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |x: f64, y: f64| x + (y - x) * u;
    let p = GeoPoint {
        lat_deg: lerp(a.lat_deg, b.lat_deg),
        lon_deg: a.lon_deg + crate::geo::lon_delta(a.lon_deg, b.lon_deg) * u,
        alt_m: match (a.alt_m, b.alt_m) {
            (Some(x), Some(y)) => Some(lerp(x, y)),
            _ => None,
        },
    };
    (u, p)
}

/// Per-waypoint closest approach of the flown path and completion of the
/// final return to launch.
pub fn compare_plan_to_track(
    plan: &MissionPlan,
    traj: &Trajectory,
    reach_radius_m: f64,
) -> Result<PlanDeviation, MissionError> {
    if traj.is_empty() {
        return Err(MissionError::Compare("trajectory is empty".into()));
    }
    if !(reach_radius_m > 0.0 && reach_radius_m.is_finite()) {
        return Err(MissionError::Compare(format!(
            "reach radius must be > 0, got {reach_radius_m}"
        )));
    }
    let mut notes = Vec::new();
    let home_alt = plan.home.and_then(|h| h.alt_m);
    if home_alt.is_none()
        && plan
            .items
            .iter()
            .any(|it| it.frame == Frame::GlobalRelativeAlt && it.coordinate.is_some())
    {
        notes.push("plan has no home altitude; relative altitudes compared against the first trajectory altitude".into());
    }
    let base_alt = home_alt.or(traj.samples[0].position.alt_m);
    let s = &traj.samples;
    let mut waypoints = Vec::new();
    for it in &plan.items {
        let Some(mut target) = plan.resolved(it) else {
            continue;
        };
        if it.frame == Frame::GlobalRelativeAlt && home_alt.is_none() {
            target.alt_m = match (it.coordinate.and_then(|c| c.alt_m), base_alt) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
        let mut best = (distance_3d_m(&target, &s[0].position), s[0].t_us);
        for w in s.windows(2) {
            let (u, p) = closest_on_segment(&target, &w[0].position, &w[1].position);
            let d = distance_3d_m(&target, &p);
            if d < best.0 {
                let t = w[0].t_us as f64 + u * (w[1].t_us - w[0].t_us) as f64;
                best = (d, t.round() as u64);
            }
        }
        waypoints.push(WaypointDeviation {
            seq: it.seq,
            planned: target,
            closest_approach_m: best.0,
            time_of_closest_approach_us: best.1,
            reached: best.0 <= reach_radius_m,
        });
    }
    let unreached = waypoints.iter().filter(|w| !w.reached).map(|w| w.seq).collect();
    let last = s[s.len() - 1].position;
    let completed_rtl = match plan.home {
        Some(h) => distance_3d_m(&h, &last) <= reach_radius_m,
        None => {
            notes.push("plan has no home position; return to launch cannot be confirmed".into());
            false
        }
    };
    Ok(PlanDeviation {
        reach_radius_m,
        waypoints,
        unreached,
        completed_rtl,
        notes,
    })
}
