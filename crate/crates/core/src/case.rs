//! Case-directory pipeline: load every evidence file recorded for a case,
//! run the analyses and assemble report sections.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::evidence::{
    parse_components, scan_case, verify_manifest, CaseManifest, ComponentRecord, EvidenceError,
    EvidenceItem, EvidenceKind, VerifyStatus,
};
use crate::media::{geotag, log_epoch_from_gps, ClockAlignment, GeotagResult, MediaManifest};
use crate::mission::{compare_plan_to_track, mission_summary, parse_plan, MissionPlan, DEFAULT_REACH_RADIUS_M};
use crate::params::{analyze_parameters, cruise_speed, parse_qgc_params, FindingCatalog};
use crate::power::{estimate_range, BatteryDocument, PWM_REFINEMENT_NOTE};
use crate::report::{
    build_report, CaseItemSummary, CaseSection, DataQualitySection, FlightSection, ForensicReport,
    LogQuality, MediaSection, MissionSection, ParametersSection, RangeSection, ReportInputs, Section,
};
use crate::track::{build_trajectory, export_geojson, export_kml, flight_summary, TrackError, Trajectory};
use crate::ulog::{parse_ulog, FlightLog, ParameterSet};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case directory {0} does not exist")]
    NotADirectory(PathBuf),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error("{path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
}

/// Investigator-controlled analysis settings.
#[derive(Debug, Clone)]
pub struct CaseOptions {
    pub reach_radius_m: f64,
    /// Overrides the battery document's empty voltage.
    pub empty_voltage_v: Option<f64>,
    pub camera_offset_s: f64,
    /// Investigator-supplied UTC of log time zero; otherwise taken from GPS.
    pub log_epoch_utc: Option<DateTime<Utc>>,
    pub catalog: FindingCatalog,
    /// Timestamp for manifests created in memory and for the report.
    pub now: DateTime<Utc>,
}

impl CaseOptions {
    pub fn new(now: DateTime<Utc>) -> Self {
        CaseOptions {
            reach_radius_m: DEFAULT_REACH_RADIUS_M,
            empty_voltage_v: None,
            camera_offset_s: 0.0,
            log_epoch_utc: None,
            catalog: FindingCatalog::default_px4(),
            now,
        }
    }
}

/// One evidence file and its decoded content or the decoding error.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub item_id: String,
    pub path: PathBuf,
    pub value: Result<T, String>,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub dir: PathBuf,
    pub manifest: CaseManifest,
    /// True when `manifest.json` exists on disk.
    pub manifest_recorded: bool,
    /// Files found on disk that the recorded manifest does not list.
    pub unrecorded: Vec<String>,
}

fn default_case_id(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "case".into())
}

fn read_manifest(path: &Path) -> Result<CaseManifest, CaseError> {
    let text = fs::read_to_string(path).map_err(|e| CaseError::Manifest {
        path: path.into(),
        msg: e.to_string(),
    })?;
    CaseManifest::from_json(&text).map_err(|e| CaseError::Manifest {
        path: path.into(),
        msg: e.to_string(),
    })
}

impl Case {
    /// Opens a case: the recorded manifest when present, extended in memory
    /// with any files not yet recorded.
    pub fn open(dir: &Path, now: DateTime<Utc>) -> Result<Case, CaseError> {
        if !dir.is_dir() {
            return Err(CaseError::NotADirectory(dir.into()));
        }
        let path = dir.join(MANIFEST_FILE);
        let fresh = scan_case(dir, now)?;
        if path.is_file() {
            let mut manifest = read_manifest(&path)?;
            let known: Vec<String> = manifest.items.iter().map(|i| i.item_id.clone()).collect();
            let unrecorded = fresh
                .iter()
                .filter(|i| !known.contains(&i.item_id))
                .map(|i| i.item_id.clone())
                .collect();
            manifest.merge_new(fresh);
            Ok(Case {
                dir: dir.into(),
                manifest,
                manifest_recorded: true,
                unrecorded,
            })
        } else {
            let unrecorded = fresh.iter().map(|i| i.item_id.clone()).collect();
            let manifest = CaseManifest::new(default_case_id(dir), now, fresh, "")?;
            Ok(Case {
                dir: dir.into(),
                manifest,
                manifest_recorded: false,
                unrecorded,
            })
        }
    }

    /// Creates or extends `manifest.json`. Returns the manifest and the
    /// number of newly recorded items.
    pub fn ingest(
        dir: &Path,
        case_id: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<(CaseManifest, usize), CaseError> {
        fs::create_dir_all(dir).map_err(|e| CaseError::Manifest {
            path: dir.into(),
            msg: e.to_string(),
        })?;
        let path = dir.join(MANIFEST_FILE);
        let fresh = scan_case(dir, now)?;
        let (manifest, added) = if path.is_file() {
            let mut m = read_manifest(&path)?;
            let n = m.merge_new(fresh);
            (m, n)
        } else {
            let n = fresh.len();
            let id = case_id.map(String::from).unwrap_or_else(|| default_case_id(dir));
            (CaseManifest::new(id, now, fresh, "")?, n)
        };
        let json = manifest.to_json()?;
        fs::write(&path, json).map_err(|e| CaseError::Manifest {
            path,
            msg: e.to_string(),
        })?;
        Ok((manifest, added))
    }

    fn path_of(&self, item: &EvidenceItem) -> PathBuf {
        if item.source_path.is_absolute() {
            item.source_path.clone()
        } else {
            self.dir.join(&item.source_path)
        }
    }

    fn load<T>(&self, kind: EvidenceKind, f: impl Fn(&[u8]) -> Result<T, String>) -> Vec<Loaded<T>> {
        self.manifest
            .items_of(kind)
            .map(|item| {
                let path = self.path_of(item);
                let value = fs::read(&path)
                    .map_err(|e| format!("cannot read: {e}"))
                    .and_then(|b| f(&b));
                Loaded {
                    item_id: item.item_id.clone(),
                    path,
                    value,
                }
            })
            .collect()
    }

    pub fn logs(&self) -> Vec<Loaded<FlightLog>> {
        self.load(EvidenceKind::FlightLog, |b| parse_ulog(b).map_err(|e| e.to_string()))
    }

    pub fn plans(&self) -> Vec<Loaded<MissionPlan>> {
        self.load(EvidenceKind::MissionPlan, |b| parse_plan(b).map_err(|e| e.to_string()))
    }

    pub fn parameter_dumps(&self) -> Vec<Loaded<ParameterSet>> {
        self.load(EvidenceKind::ParameterDump, |b| {
            let text = std::str::from_utf8(b).map_err(|e| format!("not UTF-8: {e}"))?;
            parse_qgc_params(text).map_err(|e| e.to_string())
        })
    }

    pub fn batteries(&self) -> Vec<Loaded<BatteryDocument>> {
        self.load(EvidenceKind::BatteryObservation, |b| {
            let text = std::str::from_utf8(b).map_err(|e| format!("not UTF-8: {e}"))?;
            BatteryDocument::from_json(text).map_err(|e| e.to_string())
        })
    }

    pub fn components(&self) -> Vec<Loaded<Vec<ComponentRecord>>> {
        self.load(EvidenceKind::ComponentRecord, |b| {
            let text = std::str::from_utf8(b).map_err(|e| format!("not UTF-8: {e}"))?;
            parse_components(text).map_err(|e| e.to_string())
        })
    }

    /// Media evidence: `.json` files are manifests, anything else is an
    /// image whose capture time is read from EXIF.
    pub fn media(&self) -> Option<Result<MediaManifest, String>> {
        let items: Vec<&EvidenceItem> = self.manifest.items_of(EvidenceKind::MediaManifest).collect();
        if items.is_empty() {
            return None;
        }
        let mut entries = Vec::new();
        let mut unc = Vec::new();
        let mut images: Vec<(String, Vec<u8>)> = Vec::new();
        for item in items {
            let path = self.path_of(item);
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => return Some(Err(format!("{}: cannot read: {e}", item.item_id))),
            };
            let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            if is_json {
                let m = std::str::from_utf8(&bytes)
                    .map_err(|e| e.to_string())
                    .and_then(|t| MediaManifest::from_json(t).map_err(|e| e.to_string()));
                match m {
                    Ok(m) => {
                        entries.extend(m.entries);
                        unc.extend(m.uncorrelatable);
                    }
                    Err(e) => return Some(Err(format!("{}: {e}", item.item_id))),
                }
            } else {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| item.item_id.clone());
                images.push((name, bytes));
            }
        }
        let from_images = MediaManifest::from_images(images.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
        Some(from_images.and_then(|m| {
            entries.extend(m.entries);
            unc.extend(m.uncorrelatable);
            MediaManifest::new(entries, unc)
        }).map_err(|e| e.to_string()))
    }
}

/// File stem used for per-log outputs.
pub fn log_stem(item_id: &str) -> String {
    let name = item_id.rsplit('/').next().unwrap_or(item_id);
    match name.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() => stem.to_string(),
        _ => name.to_string(),
    }
}

/// Everything the analyses produced, ready to be reported or exported.
#[derive(Debug, Clone)]
pub struct CaseAnalysis {
    pub report: ForensicReport,
    /// Trajectory of the primary log and its item id.
    pub trajectory: Option<(String, Trajectory)>,
    pub plan: Option<MissionPlan>,
    pub geotags: Vec<GeotagResult>,
    pub finding_count: usize,
}

fn status_name(s: VerifyStatus) -> &'static str {
    match s {
        VerifyStatus::Ok => "ok",
        VerifyStatus::HashMismatch => "hash_mismatch",
        VerifyStatus::Missing => "missing",
    }
}

fn first_ok<T: Clone>(loaded: &[Loaded<T>], errors: &mut Vec<String>) -> Option<(String, T)> {
    let mut found = None;
    for l in loaded {
        match &l.value {
            Ok(v) if found.is_none() => found = Some((l.item_id.clone(), v.clone())),
            Ok(_) => {}
            Err(e) => errors.push(format!("{}: {e}", l.item_id)),
        }
    }
    found
}

/// Runs every analysis the available evidence supports.
pub fn analyze_case(case: &Case, opts: &CaseOptions) -> CaseAnalysis {
    let mut errors = Vec::new();
    let mut notes = Vec::new();

    let verification: BTreeMap<String, VerifyStatus> =
        verify_manifest(&case.manifest, &case.dir).into_iter().collect();
    let case_section = if case.manifest.items.is_empty() {
        Section::missing("case directory contains no evidence files")
    } else {
        Section::available(CaseSection {
            case_id: case.manifest.case_id.clone(),
            created_at: case.manifest.created_at,
            manifest_recorded: case.manifest_recorded,
            items: case
                .manifest
                .items
                .iter()
                .map(|i| CaseItemSummary {
                    item_id: i.item_id.clone(),
                    kind: i.kind,
                    sha256: i.sha256.to_string(),
                    verification: status_name(verification.get(&i.item_id).copied().unwrap_or(VerifyStatus::Missing)).into(),
                })
                .collect(),
        })
    };
    if case.manifest_recorded && !case.unrecorded.is_empty() {
        notes.push(format!(
            "{} file(s) not in the recorded manifest were analysed: {}",
            case.unrecorded.len(),
            case.unrecorded.join(", ")
        ));
    }

    // Components
    let comps = case.components();
    let mut records = Vec::new();
    for c in &comps {
        match &c.value {
            Ok(v) => records.extend(v.iter().cloned()),
            Err(e) => errors.push(format!("{}: {e}", c.item_id)),
        }
    }
    let components = if records.is_empty() {
        Section::missing("no component record")
    } else {
        Section::available(records)
    };

    // Flight logs
    let logs = case.logs();
    let mut log_quality = Vec::new();
    for l in &logs {
        match &l.value {
            Ok(log) => log_quality.push(LogQuality {
                item_id: l.item_id.clone(),
                partial: log.quality.partial,
                unknown_messages_skipped: log.quality.unknown_messages_skipped,
                dropouts: log.dropouts.clone(),
                warnings: log.quality.warnings.clone(),
                suppressed_warnings: log.quality.suppressed_warnings,
            }),
            Err(e) => errors.push(format!("{}: {e}", l.item_id)),
        }
    }
    let primary_log = logs
        .iter()
        .find_map(|l| l.value.as_ref().ok().map(|v| (l.item_id.clone(), v)));
    let mut trajectory = None;
    let mut flight_reason = "no flight log".to_string();
    if let Some((id, log)) = &primary_log {
        match build_trajectory(log) {
            Ok(t) => trajectory = Some((id.clone(), t)),
            Err(e) => flight_reason = format!("{id}: {e}"),
        }
    } else if !logs.is_empty() {
        flight_reason = "no flight log could be decoded".into();
    }
    let extra_logs = logs.iter().filter(|l| l.value.is_ok()).count().saturating_sub(1);
    if extra_logs > 0 {
        notes.push(format!("{extra_logs} additional flight log(s) decoded; the flight section covers the first"));
    }

    // Parameters
    let dumps = case.parameter_dumps();
    let dump = first_ok(&dumps, &mut errors);
    let params: Option<(String, ParameterSet)> = match (&dump, &primary_log) {
        (Some((id, set)), Some((log_id, log))) => {
            let differing = set
                .initial
                .iter()
                .filter(|(k, v)| log.parameters.get(k).is_some_and(|e| e.value != **v))
                .count();
            notes.push(format!(
                "parameters taken from {id}; {log_id} also carries parameters ({differing} differ in value)"
            ));
            Some((id.clone(), set.clone()))
        }
        (Some((id, set)), None) => Some((id.clone(), set.clone())),
        (None, Some((id, log))) if !log.parameters.is_empty() => Some((id.clone(), log.parameters.clone())),
        _ => None,
    };
    let mut finding_count = 0;
    let parameters = match &params {
        Some((src, set)) => {
            let findings = analyze_parameters(set, &opts.catalog);
            finding_count = findings.len();
            Section::available(ParametersSection {
                source: src.clone(),
                parameter_count: set.len(),
                catalog: format!("{} v{}", opts.catalog.catalog, opts.catalog.version),
                cruise_speed_mps: cruise_speed(set),
                findings,
            })
        }
        None => Section::missing("no parameter dump and no parameters in a flight log"),
    };

    // Range
    let batteries = case.batteries();
    let range = match first_ok(&batteries, &mut errors) {
        None => Section::missing("no battery observation"),
        Some((id, doc)) => {
            let mut spec = doc.spec();
            if let Some(v) = opts.empty_voltage_v {
                spec.empty_voltage_v = v;
            }
            let param_speed = params.as_ref().and_then(|(_, s)| cruise_speed(s));
            let speed_source = if doc.power_model.cruise_speed_mps.is_some() {
                "battery document"
            } else {
                "MPC_XY_CRUISE parameter"
            };
            match doc
                .model(param_speed)
                .and_then(|m| estimate_range(&spec, &doc.observation, &m).map(|e| (m, e)))
            {
                Ok((model, estimate)) => Section::available(RangeSection {
                    source: id,
                    battery: spec,
                    observation: doc.observation,
                    power_model: model,
                    cruise_speed_source: speed_source.into(),
                    estimate,
                    future_work: vec![PWM_REFINEMENT_NOTE.into()],
                }),
                Err(e) => {
                    errors.push(format!("{id}: {e}"));
                    Section::missing(format!("{id}: {e}"))
                }
            }
        }
    };

    // Mission
    let plans = case.plans();
    let plan = first_ok(&plans, &mut errors);
    let mission = match &plan {
        None => Section::missing(if plans.is_empty() { "no mission plan" } else { "mission plan could not be decoded" }),
        Some((id, p)) => {
            let deviation = match &trajectory {
                Some((_, t)) => match compare_plan_to_track(p, t, opts.reach_radius_m) {
                    Ok(d) => Section::available(d),
                    Err(e) => Section::missing(e.to_string()),
                },
                None => Section::missing(format!("no flown trajectory ({flight_reason})")),
            };
            Section::available(MissionSection {
                source: id.clone(),
                summary: mission_summary(p),
                deviation,
            })
        }
    };

    // Flight
    let flight = match (&trajectory, &primary_log) {
        (Some((id, t)), Some((_, log))) => {
            let stem = log_stem(id);
            Section::available(FlightSection {
                source: id.clone(),
                summary: flight_summary(log, t),
                exports: vec![format!("{stem}.track.geojson"), format!("{stem}.track.kml")],
            })
        }
        _ => Section::missing(flight_reason.clone()),
    };

    // Media
    let mut geotags = Vec::new();
    let media = match case.media() {
        None => Section::missing("no media evidence"),
        Some(Err(e)) => {
            errors.push(e.clone());
            Section::missing(e)
        }
        Some(Ok(manifest)) => {
            let epoch = match opts.log_epoch_utc {
                Some(t) => Some((t, "investigator")),
                None => primary_log
                    .as_ref()
                    .and_then(|(_, l)| log_epoch_from_gps(l))
                    .map(|t| (t, "gps")),
            };
            let alignment = epoch.map(|(t, src)| ClockAlignment {
                log_epoch_utc: t,
                camera_offset_s: opts.camera_offset_s,
                source: src.into(),
            });
            let results = match (&alignment, &trajectory) {
                (Some(a), Some((_, t))) => {
                    geotags = geotag(&manifest, t, a);
                    Section::available(geotags.clone())
                }
                (None, _) => Section::missing("no clock alignment: supply the log epoch or a log with GPS UTC time"),
                (_, None) => Section::missing(format!("no flown trajectory ({flight_reason})")),
            };
            Section::available(MediaSection {
                alignment,
                results,
                uncorrelatable: manifest.uncorrelatable,
            })
        }
    };

    if let Some((_, t)) = &trajectory {
        notes.extend(t.notes.iter().cloned());
        notes.push(format!("trajectory source: {} ({})", t.source_note, t.series_used.join(", ")));
    }
    let data_quality = if log_quality.is_empty() && errors.is_empty() && notes.is_empty() {
        Section::missing("no flight log analysed and no evidence errors")
    } else {
        Section::available(DataQualitySection {
            logs: log_quality,
            evidence_errors: errors,
            notes,
        })
    };

    let report = build_report(ReportInputs {
        generated_at: opts.now,
        case: case_section,
        components,
        range,
        parameters,
        mission,
        flight,
        media,
        data_quality,
    });
    CaseAnalysis {
        report,
        trajectory,
        plan: plan.map(|(_, p)| p),
        geotags,
        finding_count,
    }
}

impl CaseAnalysis {
    /// GeoJSON and KML renderings of the primary trajectory, named as listed
    /// in the flight section.
    pub fn track_exports(&self) -> Result<Vec<(String, Vec<u8>)>, TrackError> {
        let Some((id, traj)) = &self.trajectory else {
            return Ok(Vec::new());
        };
        let stem = log_stem(id);
        Ok(vec![
            (format!("{stem}.track.geojson"), export_geojson(traj, self.plan.as_ref(), &self.geotags)?),
            (format!("{stem}.track.kml"), export_kml(traj, self.plan.as_ref(), &self.geotags)?),
        ])
    }
}
