//! Case-level evidence model: manifest, items, component inventory, hashing.
//!
//! A case directory is laid out as `case/<kind>/<files>`, where `<kind>` is
//! the snake_case name of an [`EvidenceKind`]. Ingest only ever opens files
//! for reading; the manifest records a SHA-256 digest per file so later
//! verification can detect tampering or loss.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

pub const MANIFEST_SCHEMA: &str = "uavforensics.case-manifest.v1";

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("cannot read evidence file {path}: {source}")]
    Ingest {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid component record: {0}")]
    Component(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    FlightLog,
    MissionPlan,
    ParameterDump,
    BatteryObservation,
    MediaManifest,
    ComponentRecord,
    Other,
}

impl EvidenceKind {
    pub const ALL: [EvidenceKind; 7] = [
        EvidenceKind::FlightLog,
        EvidenceKind::MissionPlan,
        EvidenceKind::ParameterDump,
        EvidenceKind::BatteryObservation,
        EvidenceKind::MediaManifest,
        EvidenceKind::ComponentRecord,
        EvidenceKind::Other,
    ];

    /// Directory name under the case root.
    pub fn dir_name(self) -> &'static str {
        match self {
            EvidenceKind::FlightLog => "flight_log",
            EvidenceKind::MissionPlan => "mission_plan",
            EvidenceKind::ParameterDump => "parameter_dump",
            EvidenceKind::BatteryObservation => "battery_observation",
            EvidenceKind::MediaManifest => "media_manifest",
            EvidenceKind::ComponentRecord => "component_record",
            EvidenceKind::Other => "other",
        }
    }
}

impl fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// Lowercase-hex SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sha256Hex(String);

impl Sha256Hex {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Sha256Hex(hex::encode(Sha256::digest(bytes)))
    }

    pub fn of_reader<R: Read>(mut reader: R) -> io::Result<Self> {
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        Ok(Sha256Hex(hex::encode(hasher.finalize())))
    }

    pub fn of_file(path: &Path) -> io::Result<Self> {
        Self::of_reader(File::open(path)?)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Sha256Hex {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let ok = s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(Sha256Hex(s))
        } else {
            Err(format!("not a lowercase hex SHA-256 digest: {s:?}"))
        }
    }
}

impl From<Sha256Hex> for String {
    fn from(h: Sha256Hex) -> String {
        h.0
    }
}

impl fmt::Display for Sha256Hex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub item_id: String,
    pub kind: EvidenceKind,
    pub source_path: PathBuf,
    pub sha256: Sha256Hex,
    #[serde(with = "rfc3339")]
    pub acquired_at: DateTime<Utc>,
}

/// Hashes `path` and records it as evidence of `kind`. The file is only read.
pub fn ingest_evidence(
    path: &Path,
    kind: EvidenceKind,
    acquired_at: DateTime<Utc>,
) -> Result<EvidenceItem, EvidenceError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    ingest_evidence_as(path, format!("{}/{}", kind.dir_name(), name), kind, acquired_at)
}

pub fn ingest_evidence_as(
    path: &Path,
    item_id: String,
    kind: EvidenceKind,
    acquired_at: DateTime<Utc>,
) -> Result<EvidenceItem, EvidenceError> {
    let sha256 = Sha256Hex::of_file(path).map_err(|source| EvidenceError::Ingest {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(EvidenceItem {
        item_id,
        kind,
        source_path: path.to_path_buf(),
        sha256,
        acquired_at,
    })
}

/// Ingests every regular file under `case/<kind>/`. `source_path` is stored
/// relative to `case_dir`, and the item id equals that relative path.
pub fn scan_case(
    case_dir: &Path,
    acquired_at: DateTime<Utc>,
) -> Result<Vec<EvidenceItem>, EvidenceError> {
    let mut items = Vec::new();
    for kind in EvidenceKind::ALL {
        let dir = case_dir.join(kind.dir_name());
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = WalkDir::new(&dir)
            .follow_links(false)
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .collect();
        files.sort();
        for file in files {
            let rel = file.strip_prefix(case_dir).unwrap_or(&file).to_path_buf();
            let id = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let mut item = ingest_evidence_as(&file, id, kind, acquired_at)?;
            item.source_path = rel;
            items.push(item);
        }
    }
    items.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseManifest {
    pub schema: String,
    pub case_id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    pub items: Vec<EvidenceItem>,
    pub notes: String,
}

#[derive(Deserialize)]
struct RawManifest {
    #[serde(default = "default_schema")]
    schema: String,
    case_id: String,
    #[serde(with = "rfc3339")]
    created_at: DateTime<Utc>,
    items: Vec<EvidenceItem>,
    #[serde(default)]
    notes: String,
}

fn default_schema() -> String {
    MANIFEST_SCHEMA.to_string()
}

impl<'de> Deserialize<'de> for CaseManifest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawManifest::deserialize(d)?;
        let mut m = CaseManifest::new(raw.case_id, raw.created_at, raw.items, raw.notes)
            .map_err(serde::de::Error::custom)?;
        m.schema = raw.schema;
        Ok(m)
    }
}

impl CaseManifest {
    /// Validates invariants and orders items by id.
    pub fn new(
        case_id: impl Into<String>,
        created_at: DateTime<Utc>,
        mut items: Vec<EvidenceItem>,
        notes: impl Into<String>,
    ) -> Result<Self, EvidenceError> {
        let case_id = case_id.into();
        if case_id.trim().is_empty() {
            return Err(EvidenceError::Invalid("case_id must be non-empty".into()));
        }
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.item_id.as_str()) {
                return Err(EvidenceError::Invalid(format!(
                    "duplicate item id {:?}",
                    item.item_id
                )));
            }
        }
        items.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        Ok(CaseManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            case_id,
            created_at,
            items,
            notes: notes.into(),
        })
    }

    /// Adds items whose ids are not yet recorded. Existing entries keep their
    /// original digest and acquisition time. Returns the number added.
    pub fn merge_new(&mut self, fresh: Vec<EvidenceItem>) -> usize {
        let known: BTreeSet<String> = self.items.iter().map(|i| i.item_id.clone()).collect();
        let mut added = 0;
        for item in fresh {
            if !known.contains(&item.item_id) {
                self.items.push(item);
                added += 1;
            }
        }
        self.items.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        added
    }

    pub fn items_of(&self, kind: EvidenceKind) -> impl Iterator<Item = &EvidenceItem> {
        self.items.iter().filter(move |i| i.kind == kind)
    }

    pub fn to_json(&self) -> Result<String, EvidenceError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self, EvidenceError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    Ok,
    HashMismatch,
    Missing,
}

/// Re-hashes every item. Relative `source_path`s resolve against `base_dir`.
pub fn verify_manifest(manifest: &CaseManifest, base_dir: &Path) -> Vec<(String, VerifyStatus)> {
    manifest
        .items
        .iter()
        .map(|item| {
            let path = if item.source_path.is_absolute() {
                item.source_path.clone()
            } else {
                base_dir.join(&item.source_path)
            };
            let status = match Sha256Hex::of_file(&path) {
                Ok(h) if h == item.sha256 => VerifyStatus::Ok,
                Ok(_) => VerifyStatus::HashMismatch,
                Err(_) => VerifyStatus::Missing,
            };
            (item.item_id.clone(), status)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Frame,
    Motor,
    Esc,
    Propeller,
    Battery,
    Autopilot,
    Gps,
    RadioReceiver,
    Telemetry,
    Camera,
    Other,
}

/// One physically examined part of the aircraft. Supplied by the examiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct ComponentRecord {
    pub component: ComponentKind,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial_number: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension_cm: Option<f64>,
}

#[derive(Deserialize)]
struct RawComponent {
    component: ComponentKind,
    description: String,
    #[serde(default)]
    serial_number: Option<String>,
    #[serde(default)]
    mass_g: Option<f64>,
    #[serde(default)]
    dimension_cm: Option<f64>,
}

impl TryFrom<RawComponent> for ComponentRecord {
    type Error = EvidenceError;

    fn try_from(r: RawComponent) -> Result<Self, Self::Error> {
        for (label, v) in [("mass_g", r.mass_g), ("dimension_cm", r.dimension_cm)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(EvidenceError::Component(format!(
                        "{label} must be strictly positive, got {v}"
                    )));
                }
            }
        }
        Ok(ComponentRecord {
            component: r.component,
            description: r.description,
            serial_number: r.serial_number,
            mass_g: r.mass_g,
            dimension_cm: r.dimension_cm,
        })
    }
}

pub fn parse_components(s: &str) -> Result<Vec<ComponentRecord>, EvidenceError> {
    Ok(serde_json::from_str(s)?)
}

/// RFC 3339 UTC with a `Z` suffix; fractional seconds only when present.
pub fn format_utc(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub(crate) mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_utc(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}
