//! Consolidated forensic report. JSON is the canonical form; the Markdown
//! rendering is derived from the same structure.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::evidence::{rfc3339, ComponentRecord, EvidenceKind};
use crate::media::{ClockAlignment, GeotagResult, GeotagStatus, UncorrelatableMedia};
use crate::mission::{MissionSummary, PlanDeviation};
use crate::params::Finding;
use crate::power::{BatterySpec, BatteryObservation, PowerModel, RangeEstimate};
use crate::track::FlightSummary;
use crate::ulog::{Dropout, PartialReason};

pub const REPORT_SCHEMA: &str = "uavforensics.report.v1";
pub const REPORT_JSON_SCHEMA: &str = include_str!("../../../schema/report.schema.json");
pub const TOOLKIT_VERSION: &str = concat!("uavforensics ", env!("CARGO_PKG_VERSION"));

/// Section titles in report order.
pub const SECTION_TITLES: [&str; 8] = [
    "Case",
    "Components",
    "Range estimate",
    "Parameters",
    "Mission",
    "Flight",
    "Media",
    "Data quality",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Available { data: T },
    NotAvailable { reason: String },
}

impl<T> Section<T> {
    pub fn available(data: T) -> Self {
        Section::Available { data }
    }

    pub fn missing(reason: impl Into<String>) -> Self {
        Section::NotAvailable {
            reason: reason.into(),
        }
    }

    pub fn data(&self) -> Option<&T> {
        match self {
            Section::Available { data } => Some(data),
            Section::NotAvailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseItemSummary {
    pub item_id: String,
    pub kind: EvidenceKind,
    pub sha256: String,
    /// `ok`, `hash_mismatch` or `missing`.
    pub verification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSection {
    pub case_id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    pub manifest_recorded: bool,
    pub items: Vec<CaseItemSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSection {
    pub source: String,
    pub battery: BatterySpec,
    pub observation: BatteryObservation,
    pub power_model: PowerModel,
    pub cruise_speed_source: String,
    pub estimate: RangeEstimate,
    pub future_work: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametersSection {
    pub source: String,
    pub parameter_count: usize,
    pub catalog: String,
    pub cruise_speed_mps: Option<f64>,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSection {
    pub source: String,
    pub summary: MissionSummary,
    pub deviation: Section<PlanDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSection {
    pub source: String,
    pub summary: FlightSummary,
    pub exports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaSection {
    pub alignment: Option<ClockAlignment>,
    pub results: Section<Vec<GeotagResult>>,
    pub uncorrelatable: Vec<UncorrelatableMedia>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogQuality {
    pub item_id: String,
    pub partial: Option<PartialReason>,
    pub unknown_messages_skipped: u64,
    pub dropouts: Vec<Dropout>,
    pub warnings: Vec<String>,
    pub suppressed_warnings: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataQualitySection {
    pub logs: Vec<LogQuality>,
    pub evidence_errors: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForensicReport {
    pub schema: String,
    pub toolkit_version: String,
    #[serde(with = "rfc3339")]
    pub generated_at: DateTime<Utc>,
    pub case: Section<CaseSection>,
    pub components: Section<Vec<ComponentRecord>>,
    pub range: Section<RangeSection>,
    pub parameters: Section<ParametersSection>,
    pub mission: Section<MissionSection>,
    pub flight: Section<FlightSection>,
    pub media: Section<MediaSection>,
    pub data_quality: Section<DataQualitySection>,
}

/// Inputs for [`build_report`]; each analysis is already a section.
#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub generated_at: DateTime<Utc>,
    pub case: Section<CaseSection>,
    pub components: Section<Vec<ComponentRecord>>,
    pub range: Section<RangeSection>,
    pub parameters: Section<ParametersSection>,
    pub mission: Section<MissionSection>,
    pub flight: Section<FlightSection>,
    pub media: Section<MediaSection>,
    pub data_quality: Section<DataQualitySection>,
}

pub fn build_report(inputs: ReportInputs) -> ForensicReport {
    ForensicReport {
        schema: REPORT_SCHEMA.into(),
        toolkit_version: TOOLKIT_VERSION.into(),
        generated_at: inputs.generated_at,
        case: inputs.case,
        components: inputs.components,
        range: inputs.range,
        parameters: inputs.parameters,
        mission: inputs.mission,
        flight: inputs.flight,
        media: inputs.media,
        data_quality: inputs.data_quality,
    }
}

pub fn render_json(report: &ForensicReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serialises");
    out.push(b'\n');
    out
}

pub fn parse_json(bytes: &[u8]) -> Result<ForensicReport, serde_json::Error> {
    serde_json::from_slice(bytes)
}

/// Compact decimal rendering without trailing zeros.
fn num(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>, decimals: usize, unit: &str) -> String {
    v.map(|x| format!("{} {unit}", num(x, decimals)).trim_end().to_string())
        .unwrap_or_else(|| "not recorded".into())
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn section<T>(out: &mut String, n: usize, s: &Section<T>, body: impl FnOnce(&mut String, &T)) {
    let _ = writeln!(out, "## {}. {}\n", n + 1, SECTION_TITLES[n]);
    match s {
        Section::Available { data } => body(out, data),
        Section::NotAvailable { reason } => {
            let _ = writeln!(out, "Not available: {reason}");
        }
    }
    out.push('\n');
}

pub fn render_markdown(r: &ForensicReport) -> Vec<u8> {
    let mut o = String::new();
    let _ = writeln!(o, "# Forensic report\n");
    let _ = writeln!(o, "- Generated: {}", crate::evidence::format_utc(&r.generated_at));
    let _ = writeln!(o, "- Toolkit: {}\n", r.toolkit_version);

    section(&mut o, 0, &r.case, |o, c| {
        let _ = writeln!(o, "Case `{}`, manifest created {}{}.\n", c.case_id, crate::evidence::format_utc(&c.created_at),
            if c.manifest_recorded { "" } else { " (not yet recorded on disk)" });
        let _ = writeln!(o, "| Item | Kind | SHA-256 | Verification |\n|---|---|---|---|");
        for i in &c.items {
            let kind = serde_json::to_value(i.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let _ = writeln!(o, "| {} | {} | `{}` | {} |", md_escape(&i.item_id), kind, i.sha256, i.verification);
        }
    });
    section(&mut o, 1, &r.components, |o, comps| {
        let _ = writeln!(o, "| Component | Description | Mass | Size |\n|---|---|---|---|");
        for c in comps {
            let kind = serde_json::to_value(c.component).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let _ = writeln!(o, "| {} | {} | {} | {} |", kind, md_escape(&c.description),
                c.mass_g.map(|m| format!("{} g", num(m, 1))).unwrap_or_default(),
                c.dimension_cm.map(|m| format!("{} cm", num(m, 1))).unwrap_or_default());
        }
    });
    section(&mut o, 2, &r.range, |o, s| {
        let e = &s.estimate;
        let _ = writeln!(o, "Source: {}\n", s.source);
        let _ = writeln!(o, "| Quantity | Value |\n|---|---|");
        let _ = writeln!(o, "| Energy, full pack | {} Wh |", num(e.e_total_wh, 2));
        let _ = writeln!(o, "| Remaining capacity | {} mAh |", num(e.remaining_capacity_mah, 1));
        let _ = writeln!(o, "| Energy remaining | {} Wh |", num(e.e_remaining_wh, 2));
        let _ = writeln!(o, "| Energy used | {} Wh |", num(e.e_used_wh, 2));
        let _ = writeln!(o, "| Total power | {} W |", num(e.total_power_w, 2));
        let _ = writeln!(o, "| Flight time | {} s |", num(e.t_flight_s, 1));
        let _ = writeln!(o, "| Average speed ({}) | {} m/s |", s.cruise_speed_source, num(e.v_avg_mps, 2));
        let _ = writeln!(o, "| Maximum range | {} m |", num(e.r_max_m, 1));
        o.push('\n');
        for a in e.assumptions.iter().chain(&s.future_work) {
            let _ = writeln!(o, "- {a}");
        }
    });
    section(&mut o, 3, &r.parameters, |o, p| {
        let _ = writeln!(o, "Source: {} ({} parameters, catalog {}).\n", p.source, p.parameter_count, p.catalog);
        if let Some(v) = p.cruise_speed_mps {
            let _ = writeln!(o, "Mission cruise speed: {} m/s.\n", num(v, 2));
        }
        if p.findings.is_empty() {
            let _ = writeln!(o, "No catalog rule matched.");
        } else {
            let _ = writeln!(o, "| Severity | Code | Parameter | Value | Meaning |\n|---|---|---|---|---|");
            for f in &p.findings {
                let sev = serde_json::to_value(f.severity).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let _ = writeln!(o, "| {} | {} | {} | {} | {} |", sev, f.code, f.parameter, f.observed, md_escape(&f.meaning));
            }
        }
    });
    section(&mut o, 4, &r.mission, |o, m| {
        let _ = writeln!(o, "Source: {}\n", m.source);
        for line in &m.summary.narrative {
            let _ = writeln!(o, "- {line}");
        }
        o.push('\n');
        match &m.deviation {
            Section::Available { data: d } => {
                let _ = writeln!(o, "Comparison with the flown track (reach radius {} m):\n", num(d.reach_radius_m, 2));
                let _ = writeln!(o, "| Item | Closest approach | At log time | Reached |\n|---|---|---|---|");
                for w in &d.waypoints {
                    let _ = writeln!(o, "| {} | {} m | {} s | {} |", w.seq + 1, num(w.closest_approach_m, 2),
                        num(w.time_of_closest_approach_us as f64 / 1e6, 3), if w.reached { "yes" } else { "no" });
                }
                let unreached: Vec<String> = d.unreached.iter().map(|s| (s + 1).to_string()).collect();
                let _ = writeln!(o, "\nUnreached items: {}.", if unreached.is_empty() { "none".into() } else { unreached.join(", ") });
                let _ = writeln!(o, "Return to launch completed: {}.", if d.completed_rtl { "yes" } else { "no" });
                for n in &d.notes {
                    let _ = writeln!(o, "- {n}");
                }
            }
            Section::NotAvailable { reason } => {
                let _ = writeln!(o, "Comparison with the flown track not available: {reason}");
            }
        }
    });
    section(&mut o, 5, &r.flight, |o, f| {
        let s = &f.summary;
        let _ = writeln!(o, "Source: {} ({}, {} samples).\n", f.source, s.source_note, s.sample_count);
        let _ = writeln!(o, "| Statistic | Value |\n|---|---|");
        let mins = (s.total_flight_time_s / 60.0).floor();
        let _ = writeln!(o, "| Total flight time | {} s ({}min {}sec) |", num(s.total_flight_time_s, 3), mins, num(s.total_flight_time_s - mins * 60.0, 0));
        let _ = writeln!(o, "| Total distance | {} m |", num(s.total_distance_m, 1));
        let _ = writeln!(o, "| Average speed | {} m/s |", num(s.avg_speed_mps, 2));
        let _ = writeln!(o, "| Max speed | {} m/s |", num(s.max_speed_mps, 2));
        let _ = writeln!(o, "| Max up speed | {} m/s |", num(s.max_up_speed_mps, 2));
        let _ = writeln!(o, "| Max down speed | {} m/s |", num(s.max_down_speed_mps, 2));
        let _ = writeln!(o, "| Max tilt angle | {} |", opt(s.max_tilt_deg, 1, "deg"));
        let _ = writeln!(o, "| OS | {} |", s.os_version.as_deref().unwrap_or("not recorded"));
        let _ = writeln!(o, "| Estimator | {} |", s.estimator.as_deref().unwrap_or("not recorded"));
        let _ = writeln!(o, "| Armed after power-on | {} |", opt(s.arming_offset_s, 1, "s"));
        let _ = writeln!(o, "\nDistance method: {}.", s.distance_method);
        for n in &s.notes {
            let _ = writeln!(o, "- {n}");
        }
        if !f.exports.is_empty() {
            let _ = writeln!(o, "\nExports: {}", f.exports.join(", "));
        }
    });
    section(&mut o, 6, &r.media, |o, m| {
        match &m.alignment {
            Some(a) => {
                let _ = writeln!(o, "Clock alignment ({}): log time zero at {}, camera offset {} s.\n", a.source,
                    crate::evidence::format_utc(&a.log_epoch_utc), num(a.camera_offset_s, 3));
            }
            None => {
                let _ = writeln!(o, "No clock alignment available.\n");
            }
        }
        match &m.results {
            Section::Available { data } => {
                let _ = writeln!(o, "| File | Log time | Status | Position | Sample spacing |\n|---|---|---|---|---|");
                for g in data {
                    let status = match g.confidence {
                        GeotagStatus::Interpolated => "interpolated",
                        GeotagStatus::ExtrapolationRefused => "extrapolation refused",
                        GeotagStatus::OutOfFlight => "out of flight",
                    };
                    let pos = g.position.map(|p| format!("{:.7}, {:.7}, {}", p.lat_deg, p.lon_deg, opt(p.alt_m, 2, "m"))).unwrap_or_default();
                    let _ = writeln!(o, "| {} | {} s | {} | {} | {} |", md_escape(&g.file_name), num(g.t_log_us as f64 / 1e6, 3), status, pos,
                        g.spacing_m.map(|d| format!("{} m", num(d, 2))).unwrap_or_default());
                }
            }
            Section::NotAvailable { reason } => {
                let _ = writeln!(o, "Geotagging not available: {reason}");
            }
        }
        if !m.uncorrelatable.is_empty() {
            o.push('\n');
        }
        for u in &m.uncorrelatable {
            let _ = writeln!(o, "- {} not correlatable: {}", md_escape(&u.file_name), u.reason);
        }
    });
    section(&mut o, 7, &r.data_quality, |o, q| {
        for l in &q.logs {
            let partial = match l.partial {
                Some(PartialReason::Truncated { offset }) => format!("truncated at byte {offset}"),
                Some(PartialReason::IncompatibleFlags { offset }) => format!("stopped at byte {offset} (incompatible flags)"),
                None => "complete".into(),
            };
            let _ = writeln!(o, "- {}: {}, {} dropouts, {} unknown messages skipped, {} warnings",
                l.item_id, partial, l.dropouts.len(), l.unknown_messages_skipped, l.warnings.len() as u64 + l.suppressed_warnings);
            for w in &l.warnings {
                let _ = writeln!(o, "  - {w}");
            }
        }
        for e in &q.evidence_errors {
            let _ = writeln!(o, "- evidence error: {e}");
        }
        for n in &q.notes {
            let _ = writeln!(o, "- {n}");
        }
    });
    o.into_bytes()
}
