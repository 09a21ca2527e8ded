use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use uavforensics::geo::{haversine_m, offset_point};
use uavforensics::mission::{
    compare_plan_to_track, mission_summary, parse_plan, render_plan, MissionCommand, MissionItem, MissionPlan,
};
use uavforensics::synth;
use uavforensics::track::{build_trajectory, TrackSample, Trajectory};
use uavforensics::GeoPoint;

/// Track visiting each point in turn, `steps` samples per segment.
fn track_through(points: &[GeoPoint], steps: usize) -> Trajectory {
    let mut samples = Vec::new();
    let mut t = 0u64;
    for w in points.windows(2) {
        for k in 0..steps {
            let f = k as f64 / steps as f64;
            let lerp = |a: f64, b: f64| a + (b - a) * f;
            samples.push(TrackSample {
                t_us: t,
                position: GeoPoint::new(
                    lerp(w[0].lat_deg, w[1].lat_deg),
                    lerp(w[0].lon_deg, w[1].lon_deg),
                    Some(lerp(w[0].alt_m.unwrap(), w[1].alt_m.unwrap())),
                )
                .unwrap(),
                local_ned_m: None,
                velocity_mps: None,
                attitude_quat: None,
            });
            t += 100_000;
        }
    }
    let last = *points.last().unwrap();
    samples.push(TrackSample { t_us: t, position: last, local_ned_m: None, velocity_mps: None, attitude_quat: None });
    Trajectory::new(samples, "synthetic").unwrap()
}

fn spatial_points(plan: &MissionPlan) -> Vec<GeoPoint> {
    plan.items.iter().filter_map(|i| plan.resolved(i)).collect()
}

#[test]
fn reference_mission_decodes_to_expected_sequence() {
    let plan = parse_plan(&render_plan(&synth::reference_mission())).unwrap();
    use MissionCommand::*;
    let cmds: Vec<_> = plan.items.iter().map(|i| i.command).collect();
    assert_eq!(
        cmds,
        vec![Takeoff, Waypoint, ChangeSpeed, Waypoint, ConditionYaw, Waypoint, Waypoint, LoiterTime, Waypoint, Waypoint, ReturnToLaunch]
    );
    assert_eq!(plan.items[0].coordinate.unwrap().alt_m, Some(10.0));
    assert_eq!(plan.items[2].speed_mps, Some(2.0));
    assert_eq!(plan.cruise_speed_mps, Some(5.0));
    let holds = plan.items.iter().filter(|i| i.hold_s == Some(5.0) && i.yaw_deg == Some(180.0)).count();
    assert_eq!(holds, 4);
}

#[test]
fn reference_mission_narrative() {
    let s = mission_summary(&synth::reference_mission());
    let text = s.narrative.join("\n");
    assert!(text.contains("hold 5 s"));
    assert!(s.narrative.last().unwrap().ends_with("return to launch"));
    assert!(s.narrative[0].contains("takeoff to 10 m"));
}

#[test]
fn track_through_every_waypoint_reaches_all() {
    let plan = synth::reference_mission();
    let pts = spatial_points(&plan);
    let home = plan.home.unwrap();
    let mut route = pts.clone();
    route.push(home);
    let dev = compare_plan_to_track(&plan, &track_through(&route, 20), 3.0).unwrap();
    assert!(dev.unreached.is_empty(), "{:?}", dev.unreached);
    assert!(dev.waypoints.iter().all(|w| w.closest_approach_m < 1e-6), "{:?}", dev.waypoints);
    assert!(dev.completed_rtl);
}

#[test]
fn track_offset_ten_metres_east_reaches_none() {
    let home = synth::home();
    let north = |n: f64| GeoPoint { alt_m: Some(10.0), ..offset_point(&home, n, 0.0, 0.0) };
    let items = vec![
        MissionItem::takeoff(0, north(0.0)),
        MissionItem::waypoint(1, north(60.0), None, None),
        MissionItem::waypoint(2, north(120.0), Some(5.0), Some(180.0)),
        MissionItem::waypoint(3, north(200.0), None, None),
    ];
    let plan = MissionPlan::new(Some(home), items).unwrap();
    let shifted: Vec<GeoPoint> = spatial_points(&plan).iter().map(|p| offset_point(p, 0.0, 10.0, 0.0)).collect();
    let dev = compare_plan_to_track(&plan, &track_through(&shifted, 20), 3.0).unwrap();
    assert_eq!(dev.unreached, vec![0, 1, 2, 3]);
    for w in &dev.waypoints {
        let oracle = haversine_m(&w.planned, &offset_point(&w.planned, 0.0, 10.0, 0.0));
        assert!((oracle - 10.0).abs() < 0.01);
        assert!((w.closest_approach_m - 10.0).abs() < 0.1, "{w:?}");
    }
}

#[test]
fn reference_scenario_stops_short_of_waypoint_10() {
    let t = build_trajectory(&synth::reference_flight_log()).unwrap();
    let dev = compare_plan_to_track(&synth::reference_mission(), &t, 3.0).unwrap();
    assert!(dev.unreached.contains(&9));
    assert!(!dev.completed_rtl);
    let reached: Vec<u32> = dev.waypoints.iter().filter(|w| w.reached).map(|w| w.seq).collect();
    assert_eq!(reached, vec![0, 1, 3, 5, 6, 7, 8]);
}

#[test]
fn closest_approach_is_reversal_invariant() {
    let plan = synth::reference_mission();
    let fwd = build_trajectory(&synth::reference_flight_log()).unwrap();
    let last = fwd.samples.last().unwrap().t_us;
    let rev = Trajectory::new(
        fwd.samples.iter().rev().map(|s| TrackSample { t_us: last - s.t_us, ..*s }).collect(),
        "synthetic",
    )
    .unwrap();
    let a = compare_plan_to_track(&plan, &fwd, 3.0).unwrap();
    let b = compare_plan_to_track(&plan, &rev, 3.0).unwrap();
    for (x, y) in a.waypoints.iter().zip(&b.waypoints) {
        assert!((x.closest_approach_m - y.closest_approach_m).abs() < 1e-9, "{x:?} {y:?}");
    }
    assert_eq!(a.unreached, b.unreached);
}

#[test]
fn larger_radius_never_shrinks_reached_set() {
    let plan = synth::reference_mission();
    let t = build_trajectory(&synth::reference_flight_log()).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..50 {
        let r1: f64 = rng.gen_range(0.01..30.0);
        let r2 = r1 + rng.gen_range(0.0..30.0);
        let a = compare_plan_to_track(&plan, &t, r1).unwrap();
        let b = compare_plan_to_track(&plan, &t, r2).unwrap();
        for s in b.unreached.iter() {
            assert!(a.unreached.contains(s), "r1={r1} r2={r2}");
        }
    }
}

fn random_plan(rng: &mut StdRng) -> MissionPlan {
    let home = GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-170.0..170.0), Some(rng.gen_range(0.0..900.0))).unwrap();
    let n = rng.gen_range(0..12);
    let mut items = Vec::new();
    for seq in 0..n {
        let at = offset_point(&home, rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0), 0.0);
        let at = GeoPoint { alt_m: Some(rng.gen_range(2.0..120.0)), ..at };
        let item = match rng.gen_range(0..8) {
            0 => MissionItem::takeoff(seq, at),
            1 => MissionItem::waypoint(seq, at, None, None),
            2 => MissionItem::waypoint(seq, at, Some(rng.gen_range(0.0..30.0)), Some(rng.gen_range(0.0..360.0))),
            3 => MissionItem::change_speed(seq, rng.gen_range(0.5..15.0)),
            4 => MissionItem::condition_yaw(seq, rng.gen_range(0.0..360.0)),
            5 => MissionItem::loiter_time(seq, Some(at), rng.gen_range(0.0..60.0)),
            6 => MissionItem::land(seq, at),
            _ => MissionItem::return_to_launch(seq),
        };
        items.push(item);
    }
    let mut plan = MissionPlan::new(Some(home), items).unwrap();
    plan.cruise_speed_mps = Some(rng.gen_range(1.0..15.0));
    plan
}

#[test]
fn render_then_parse_round_trips() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..200 {
        let plan = random_plan(&mut rng);
        let back = parse_plan(&render_plan(&plan)).unwrap();
        assert_eq!(back, plan);
    }
}

#[test]
fn unknown_command_survives_round_trip() {
    let doc = br#"{"fileType":"Plan","version":1,"groundStation":"QGroundControl",
        "mission":{"version":2,"firmwareType":12,"vehicleType":2,"cruiseSpeed":15,"hoverSpeed":5,
        "plannedHomePosition":[47.0,8.0,400.0],
        "items":[{"type":"SimpleItem","doJumpId":1,"command":9999,"frame":2,"autoContinue":true,
                  "params":[1,2,3,4,5,6,7]}]},
        "geoFence":{"version":2,"polygons":[],"circles":[]},
        "rallyPoints":{"version":2,"points":[]}}"#;
    let plan = parse_plan(doc).unwrap();
    assert_eq!(plan.items[0].command, MissionCommand::Other(9999));
    let again = parse_plan(&render_plan(&plan)).unwrap();
    assert_eq!(again, plan);
}

#[test]
fn malformed_documents_name_the_problem() {
    let err = parse_plan(b"{\"mission\": [").unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
    let err = parse_plan(br#"{"fileType":"Plan","mission":{"items":[{"type":"SimpleItem","command":16,"frame":3,"params":[0,0,0,0,"x",8,10]}]}}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("mission.items[0]"), "{err}");
}
