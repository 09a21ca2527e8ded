use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::json;
use uavforensics::case::{analyze_case, log_stem, Case, CaseAnalysis, CaseOptions, Loaded};
use uavforensics::evidence::Sha256Hex;
use uavforensics::params::FindingCatalog;
use uavforensics::power::{estimate_range, BatterySpec, BatteryObservation, PowerModel, DEFAULT_EMPTY_VOLTAGE_4S, LIPO_CELL_FULL_V};
use uavforensics::report::{render_json, render_markdown, Section};
use uavforensics::ulog::{parse_ulog, DataQuality, Dropout, FlightLog, LoggedText};

use crate::{evidence, usage, AlignArgs, CaseArgs, Command, Failure, RangeArgs};

type Outcome = Result<(), Failure>;

pub fn run(cmd: Command, now: DateTime<Utc>) -> Outcome {
    match cmd {
        Command::Ingest { case_dir, case_id } => ingest(&case_dir, case_id.as_deref(), now),
        Command::Log { path, out } => log(&path, out, now),
        Command::Params { case, catalog } => params(&case, catalog.as_deref(), now),
        Command::Mission { case, reach_radius } => mission(&case, reach_radius, now),
        Command::Track { case } => track(&case, now),
        Command::Range(args) => range(&args, now),
        Command::Media { case, align } => media(&case, &align, now),
        Command::Report { case, reach_radius, empty_v, align, catalog } => {
            report(&case, reach_radius, empty_v, &align, catalog.as_deref(), now)
        }
    }
}

fn out_dir(case_dir: &Path, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| case_dir.join("analysis"))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report types serialise");
    out.push(b'\n');
    out
}

fn open_case(dir: &Path, now: DateTime<Utc>) -> Result<Case, Failure> {
    Case::open(dir, now).map_err(|e| match e {
        uavforensics::case::CaseError::NotADirectory(_) => usage(e),
        other => evidence(other),
    })
}

/// Fails with exit code 2 on the first undecodable file of a kind.
fn strict<T>(loaded: &[Loaded<T>]) -> Outcome {
    match loaded.iter().find_map(|l| l.value.as_ref().err().map(|e| (l, e))) {
        Some((l, e)) => Err(evidence(format!("{}: {e}", l.path.display()))),
        None => Ok(()),
    }
}

fn load_catalog(path: Option<&Path>) -> Result<FindingCatalog, Failure> {
    let Some(path) = path else {
        return Ok(FindingCatalog::default_px4());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    FindingCatalog::from_json(&text).map_err(|e| evidence(format!("{}: {e}", path.display())))
}

fn section_or<T>(s: &Section<T>, missing: impl FnOnce(&str) -> Failure) -> Result<&T, Failure> {
    match s {
        Section::Available { data } => Ok(data),
        Section::NotAvailable { reason } => Err(missing(reason)),
    }
}

fn nothing_to_analyse(what: &str) -> impl FnOnce(&str) -> Failure + '_ {
    move |reason| usage(format!("{what} not available: {reason}"))
}

fn ingest(case_dir: &Path, case_id: Option<&str>, now: DateTime<Utc>) -> Outcome {
    let (manifest, added) = Case::ingest(case_dir, case_id, now).map_err(evidence)?;
    println!(
        "case {}: {} item(s), {added} newly recorded in {}",
        manifest.case_id,
        manifest.items.len(),
        case_dir.join(uavforensics::case::MANIFEST_FILE).display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SeriesDigest {
    message: String,
    multi_id: u8,
    rows: usize,
    first_us: Option<u64>,
    last_us: Option<u64>,
    columns: Vec<String>,
}

#[derive(Serialize)]
struct LogDigest {
    file: String,
    sha256: String,
    ulog_version: u8,
    start_timestamp_us: u64,
    info: BTreeMap<String, serde_json::Value>,
    series: Vec<SeriesDigest>,
    parameter_count: usize,
    parameter_changes: usize,
    logged_text: Vec<LoggedText>,
    dropouts: Vec<Dropout>,
    quality: DataQuality,
}

fn digest(file: &str, bytes: &[u8], log: &FlightLog) -> LogDigest {
    let info = log
        .info
        .iter()
        .map(|e| {
            let v = match (e.as_string(), e.as_u64()) {
                (Some(s), _) => json!(s),
                (None, Some(n)) => json!(n),
                _ => json!({"type": e.type_name, "hex": e.value.iter().map(|b| format!("{b:02x}")).collect::<String>()}),
            };
            (e.key.clone(), v)
        })
        .collect();
    let series = log
        .series
        .values()
        .map(|s| SeriesDigest {
            message: s.message_name.clone(),
            multi_id: s.multi_id,
            rows: s.rows.len(),
            first_us: s.rows.first().map(|r| r.timestamp_us),
            last_us: s.rows.last().map(|r| r.timestamp_us),
            columns: s.columns.iter().map(|c| c.name.clone()).collect(),
        })
        .collect();
    LogDigest {
        file: file.to_string(),
        sha256: Sha256Hex::of_bytes(bytes).to_string(),
        ulog_version: log.header.version,
        start_timestamp_us: log.header.start_timestamp_us,
        info,
        series,
        parameter_count: log.parameters.len(),
        parameter_changes: log.parameters.changes.len(),
        logged_text: log.logged_text.clone(),
        dropouts: log.dropouts.clone(),
        quality: log.quality.clone(),
    }
}

fn log(path: &Path, out: Option<PathBuf>, now: DateTime<Utc>) -> Outcome {
    let (files, out): (Vec<(String, PathBuf)>, Option<PathBuf>) = if path.is_dir() {
        let case = open_case(path, now)?;
        let logs: Vec<_> = case
            .manifest
            .items_of(uavforensics::evidence::EvidenceKind::FlightLog)
            .map(|i| (i.item_id.clone(), path.join(&i.source_path)))
            .collect();
        if logs.is_empty() {
            return Err(usage(format!("{}: no files under flight_log/", path.display())));
        }
        (logs, Some(out_dir(path, &out)))
    } else if path.is_file() {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        (vec![(name, path.to_path_buf())], out)
    } else {
        return Err(usage(format!("{}: no such file or directory", path.display())));
    };
    for (id, file) in files {
        let bytes = fs::read(&file).map_err(|e| evidence(format!("{}: {e}", file.display())))?;
        let log = parse_ulog(&bytes).map_err(|e| evidence(format!("{}: {e}", file.display())))?;
        let d = digest(&id, &bytes, &log);
        let rows: usize = d.series.iter().map(|s| s.rows).sum();
        let status = match &log.quality.partial {
            Some(p) => format!("partial ({p:?})"),
            None => "complete".into(),
        };
        println!(
            "{id}: {status}, {} series, {rows} rows, {} parameters, {} dropouts",
            d.series.len(),
            d.parameter_count,
            d.dropouts.len()
        );
        match &out {
            Some(dir) => write(dir, &format!("{}.log.json", log_stem(&id)), &to_json(&d))?,
            None => print!("{}", String::from_utf8_lossy(&to_json(&d))),
        }
    }
    Ok(())
}

fn params(args: &CaseArgs, catalog: Option<&Path>, now: DateTime<Utc>) -> Outcome {
    let case = open_case(&args.case_dir, now)?;
    strict(&case.parameter_dumps())?;
    strict(&case.logs())?;
    let opts = CaseOptions { catalog: load_catalog(catalog)?, ..CaseOptions::new(now) };
    let a = analyze_case(&case, &opts);
    let p = section_or(&a.report.parameters, nothing_to_analyse("parameters"))?;
    println!("{}: {} parameters, {} findings", p.source, p.parameter_count, p.findings.len());
    for f in &p.findings {
        println!("  {:8} {:26} {}={}  {}", format!("{:?}", f.severity).to_lowercase(), f.code, f.parameter, f.observed, f.meaning);
    }
    write(&out_dir(&args.case_dir, &args.out), "params.json", &to_json(p))
}

fn mission(args: &CaseArgs, reach_radius: f64, now: DateTime<Utc>) -> Outcome {
    if !(reach_radius > 0.0 && reach_radius.is_finite()) {
        return Err(usage(format!("--reach-radius must be > 0, got {reach_radius}")));
    }
    let case = open_case(&args.case_dir, now)?;
    strict(&case.plans())?;
    let a = analyze_case(&case, &CaseOptions { reach_radius_m: reach_radius, ..CaseOptions::new(now) });
    let m = section_or(&a.report.mission, nothing_to_analyse("mission"))?;
    println!("{}:", m.source);
    for line in &m.summary.narrative {
        println!("  {line}");
    }
    match &m.deviation {
        Section::Available { data } => {
            let unreached: Vec<String> = data.unreached.iter().map(|s| (s + 1).to_string()).collect();
            println!(
                "unreached items: {}; return to launch completed: {}",
                if unreached.is_empty() { "none".into() } else { unreached.join(", ") },
                if data.completed_rtl { "yes" } else { "no" }
            );
        }
        Section::NotAvailable { reason } => println!("comparison not available: {reason}"),
    }
    write(&out_dir(&args.case_dir, &args.out), "mission.json", &to_json(m))
}

fn write_exports(a: &CaseAnalysis, out: &Path) -> Outcome {
    for (name, bytes) in a.track_exports().map_err(evidence)? {
        write(out, &name, &bytes)?;
    }
    Ok(())
}

fn track(args: &CaseArgs, now: DateTime<Utc>) -> Outcome {
    let case = open_case(&args.case_dir, now)?;
    strict(&case.logs())?;
    let a = analyze_case(&case, &CaseOptions::new(now));
    let f = section_or(&a.report.flight, nothing_to_analyse("flight"))?;
    let s = &f.summary;
    println!("{} ({}, {} samples)", f.source, s.source_note, s.sample_count);
    println!("  total flight time  {:.1} s", s.total_flight_time_s);
    println!("  total distance     {:.1} m", s.total_distance_m);
    println!("  average speed      {:.2} m/s", s.avg_speed_mps);
    println!("  max speed          {:.2} m/s", s.max_speed_mps);
    println!("  max up / down      {:.2} / {:.2} m/s", s.max_up_speed_mps, s.max_down_speed_mps);
    if let Some(t) = s.max_tilt_deg {
        println!("  max tilt           {t:.1} deg");
    }
    let out = out_dir(&args.case_dir, &args.out);
    write(&out, "flight.json", &to_json(f))?;
    write_exports(&a, &out)
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage(format!("{flag} is required when the case has no battery document")))
}

fn range(args: &RangeArgs, now: DateTime<Utc>) -> Outcome {
    let doc = match &args.case_dir {
        Some(dir) => {
            let case = open_case(dir, now)?;
            let b = case.batteries();
            strict(&b)?;
            let params = case.parameter_dumps();
            let speed = params
                .iter()
                .find_map(|l| l.value.as_ref().ok())
                .and_then(uavforensics::params::cruise_speed);
            b.into_iter().find_map(|l| l.value.ok()).map(|d| (d, speed))
        }
        None => None,
    };
    let (spec, obs, model) = match doc {
        Some((d, param_speed)) => {
            let base = d.spec();
            let spec = BatterySpec {
                cell_count: args.cells.unwrap_or(base.cell_count),
                capacity_mah: args.capacity_mah.unwrap_or(base.capacity_mah),
                full_voltage_v: args.full_v.unwrap_or(base.full_voltage_v),
                empty_voltage_v: args.empty_v.unwrap_or(base.empty_voltage_v),
            };
            let speed = args.cruise_mps.or(d.power_model.cruise_speed_mps).or(param_speed);
            let model = PowerModel {
                per_motor_cruise_w: args.motor_w.unwrap_or(d.power_model.per_motor_cruise_w),
                motor_count: args.motors.unwrap_or(d.power_model.motor_count),
                avionics_w: args.avionics_w.unwrap_or(d.power_model.avionics_w),
                cruise_speed_mps: need(speed, "--cruise-mps")?,
            };
            let obs = BatteryObservation { observed_voltage_v: args.observed_v.unwrap_or(d.observation.observed_voltage_v) };
            (spec, obs, model)
        }
        None => {
            let full = need(args.full_v, "--full-v")?;
            let cells = args.cells.unwrap_or(((full / LIPO_CELL_FULL_V).round() as u32).max(1));
            let spec = BatterySpec {
                cell_count: cells,
                capacity_mah: need(args.capacity_mah, "--capacity-mah")?,
                full_voltage_v: full,
                empty_voltage_v: args.empty_v.unwrap_or(DEFAULT_EMPTY_VOLTAGE_4S / 4.0 * cells as f64),
            };
            let model = PowerModel {
                per_motor_cruise_w: need(args.motor_w, "--motor-w")?,
                motor_count: need(args.motors, "--motors")?,
                avionics_w: args.avionics_w.unwrap_or(0.0),
                cruise_speed_mps: need(args.cruise_mps, "--cruise-mps")?,
            };
            (spec, BatteryObservation { observed_voltage_v: need(args.observed_v, "--observed-v")? }, model)
        }
    };
    spec.validate().map_err(usage)?;
    let est = estimate_range(&spec, &obs, &model).map_err(usage)?;
    println!("Energy, full pack      {:.2} Wh", est.e_total_wh);
    println!("Remaining capacity     {:.0} mAh", est.remaining_capacity_mah);
    println!("Energy used            {:.2} Wh", est.e_used_wh);
    println!("Total power            {} W", est.total_power_w);
    println!("Flight time (T)        {:.1} s", est.t_flight_s);
    println!("Maximum range (R)      {:.1} m", est.r_max_m);
    for a in &est.assumptions {
        println!("- {a}");
    }
    let out = match (&args.out, &args.case_dir) {
        (Some(o), _) => Some(o.clone()),
        (None, Some(c)) => Some(c.join("analysis")),
        (None, None) => None,
    };
    if let Some(out) = out {
        let doc = json!({"battery": spec, "observation": obs, "power_model": model, "estimate": est});
        write(&out, "range.json", &to_json(&doc))?;
    }
    Ok(())
}

fn align_options(align: &AlignArgs, now: DateTime<Utc>) -> CaseOptions {
    CaseOptions { camera_offset_s: align.camera_offset, log_epoch_utc: align.log_epoch, ..CaseOptions::new(now) }
}

fn media(args: &CaseArgs, align: &AlignArgs, now: DateTime<Utc>) -> Outcome {
    let case = open_case(&args.case_dir, now)?;
    if let Some(Err(e)) = case.media() {
        return Err(evidence(e));
    }
    strict(&case.logs())?;
    let a = analyze_case(&case, &align_options(align, now));
    let m = section_or(&a.report.media, nothing_to_analyse("media"))?;
    match &m.results {
        Section::Available { data } => {
            for g in data {
                let pos = g.position.map(|p| format!("{:.7}, {:.7}", p.lat_deg, p.lon_deg)).unwrap_or_default();
                println!("  {:20} t={:>10.3} s  {:?}  {pos}", g.file_name, g.t_log_us as f64 / 1e6, g.confidence);
            }
        }
        Section::NotAvailable { reason } => println!("geotagging not available: {reason}"),
    }
    for u in &m.uncorrelatable {
        println!("  {:20} not correlatable: {}", u.file_name, u.reason);
    }
    write(&out_dir(&args.case_dir, &args.out), "media.json", &to_json(m))
}

fn report(
    args: &CaseArgs,
    reach_radius: f64,
    empty_v: Option<f64>,
    align: &AlignArgs,
    catalog: Option<&Path>,
    now: DateTime<Utc>,
) -> Outcome {
    if !(reach_radius > 0.0 && reach_radius.is_finite()) {
        return Err(usage(format!("--reach-radius must be > 0, got {reach_radius}")));
    }
    let case = open_case(&args.case_dir, now)?;
    let opts = CaseOptions {
        reach_radius_m: reach_radius,
        empty_voltage_v: empty_v,
        catalog: load_catalog(catalog)?,
        ..align_options(align, now)
    };
    let a = analyze_case(&case, &opts);
    let out = out_dir(&args.case_dir, &args.out);
    write(&out, "report.json", &render_json(&a.report))?;
    write(&out, "report.md", &render_markdown(&a.report))?;
    write_exports(&a, &out)?;
    let missing: Vec<&str> = [
        ("case", a.report.case.data().is_none()),
        ("components", a.report.components.data().is_none()),
        ("range", a.report.range.data().is_none()),
        ("parameters", a.report.parameters.data().is_none()),
        ("mission", a.report.mission.data().is_none()),
        ("flight", a.report.flight.data().is_none()),
        ("media", a.report.media.data().is_none()),
        ("data quality", a.report.data_quality.data().is_none()),
    ]
    .into_iter()
    .filter_map(|(n, m)| m.then_some(n))
    .collect();
    if !missing.is_empty() {
        println!("sections not available: {}", missing.join(", "));
    }
    Ok(())
}
