use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// File magic: `ULog` followed by 0x01 0x12 0x35.
pub const MAGIC: [u8; 7] = [0x55, 0x4C, 0x6F, 0x67, 0x01, 0x12, 0x35];
pub const SYNC_MAGIC: [u8; 8] = [0x2F, 0x73, 0x13, 0x20, 0x25, 0x0C, 0xBB, 0x12];
pub const HEADER_LEN: usize = 16;
/// Incompatible flag bit 0 of byte 0: data appended at `appended_offsets`.
pub const INCOMPAT_DATA_APPENDED: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UlogHeader {
    pub version: u8,
    pub start_timestamp_us: u64,
}

impl Default for UlogHeader {
    fn default() -> Self {
        UlogHeader {
            version: 1,
            start_timestamp_us: 0,
        }
    }
}

/// Payload of the `'B'` flag-bits message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlagBits {
    pub compat: [u8; 8],
    pub incompat: [u8; 8],
    pub appended_offsets: [u64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarType {
    Int8,
    UInt8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Int64,
    UInt64,
    Float,
    Double,
    Bool,
    Char,
}

impl ScalarType {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "int8_t" => ScalarType::Int8,
            "uint8_t" => ScalarType::UInt8,
            "int16_t" => ScalarType::Int16,
            "uint16_t" => ScalarType::UInt16,
            "int32_t" => ScalarType::Int32,
            "uint32_t" => ScalarType::UInt32,
            "int64_t" => ScalarType::Int64,
            "uint64_t" => ScalarType::UInt64,
            "float" => ScalarType::Float,
            "double" => ScalarType::Double,
            "bool" => ScalarType::Bool,
            "char" => ScalarType::Char,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Int8 => "int8_t",
            ScalarType::UInt8 => "uint8_t",
            ScalarType::Int16 => "int16_t",
            ScalarType::UInt16 => "uint16_t",
            ScalarType::Int32 => "int32_t",
            ScalarType::UInt32 => "uint32_t",
            ScalarType::Int64 => "int64_t",
            ScalarType::UInt64 => "uint64_t",
            ScalarType::Float => "float",
            ScalarType::Double => "double",
            ScalarType::Bool => "bool",
            ScalarType::Char => "char",
        }
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::Int8 | ScalarType::UInt8 | ScalarType::Bool | ScalarType::Char => 1,
            ScalarType::Int16 | ScalarType::UInt16 => 2,
            ScalarType::Int32 | ScalarType::UInt32 | ScalarType::Float => 4,
            ScalarType::Int64 | ScalarType::UInt64 | ScalarType::Double => 8,
        }
    }

    pub fn decode(self, b: &[u8]) -> Value {
        match self {
            ScalarType::Int8 => Value::I8(b[0] as i8),
            ScalarType::UInt8 => Value::U8(b[0]),
            ScalarType::Bool => Value::Bool(b[0] != 0),
            ScalarType::Char => Value::Char(b[0]),
            ScalarType::Int16 => Value::I16(i16::from_le_bytes([b[0], b[1]])),
            ScalarType::UInt16 => Value::U16(u16::from_le_bytes([b[0], b[1]])),
            ScalarType::Int32 => Value::I32(i32::from_le_bytes(b[..4].try_into().unwrap())),
            ScalarType::UInt32 => Value::U32(u32::from_le_bytes(b[..4].try_into().unwrap())),
            ScalarType::Float => Value::F32(f32::from_le_bytes(b[..4].try_into().unwrap())),
            ScalarType::Int64 => Value::I64(i64::from_le_bytes(b[..8].try_into().unwrap())),
            ScalarType::UInt64 => Value::U64(u64::from_le_bytes(b[..8].try_into().unwrap())),
            ScalarType::Double => Value::F64(f64::from_le_bytes(b[..8].try_into().unwrap())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    Scalar(ScalarType),
    /// Another format definition, referenced by name.
    Nested(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: FieldType,
    pub array_len: Option<usize>,
}

impl FieldDef {
    pub fn scalar(ty: ScalarType, name: &str) -> Self {
        FieldDef {
            name: name.to_string(),
            ty: FieldType::Scalar(ty),
            array_len: None,
        }
    }

    pub fn array(ty: ScalarType, name: &str, len: usize) -> Self {
        FieldDef {
            name: name.to_string(),
            ty: FieldType::Scalar(ty),
            array_len: Some(len),
        }
    }

    pub fn is_padding(&self) -> bool {
        self.name.starts_with("_padding")
    }

    pub fn type_string(&self) -> String {
        let base = match &self.ty {
            FieldType::Scalar(s) => s.name().to_string(),
            FieldType::Nested(n) => n.clone(),
        };
        match self.array_len {
            Some(n) => format!("{base}[{n}]"),
            None => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFormat {
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl MessageFormat {
    /// Renders the `'F'` message body, e.g. `name:uint64_t timestamp;float x;`.
    pub fn definition(&self) -> String {
        let mut s = format!("{}:", self.name);
        for f in &self.fields {
            s.push_str(&f.type_string());
            s.push(' ');
            s.push_str(&f.name);
            s.push(';');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub msg_id: u16,
    pub message_name: String,
    pub multi_id: u8,
}

/// One decoded scalar. `Raw` holds bytes of nesting deeper than one level.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    I8(i8),
    U8(u8),
    I16(i16),
    U16(u16),
    I32(i32),
    U32(u32),
    I64(i64),
    U64(u64),
    F32(f32),
    F64(f64),
    Bool(bool),
    Char(u8),
    Raw(Vec<u8>),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        Some(match *self {
            Value::I8(v) => v as f64,
            Value::U8(v) => v as f64,
            Value::I16(v) => v as f64,
            Value::U16(v) => v as f64,
            Value::I32(v) => v as f64,
            Value::U32(v) => v as f64,
            Value::I64(v) => v as f64,
            Value::U64(v) => v as f64,
            Value::F32(v) => v as f64,
            Value::F64(v) => v,
            Value::Bool(v) => v as u8 as f64,
            Value::Char(v) => v as f64,
            Value::Raw(_) => return None,
        })
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Value::I8(v) => out.push(*v as u8),
            Value::U8(v) | Value::Char(v) => out.push(*v),
            Value::Bool(v) => out.push(*v as u8),
            Value::I16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::U16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::U32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::Raw(b) => out.extend_from_slice(b),
        }
    }

    /// Whether this value can populate a column of type `ty`.
    pub fn matches(&self, ty: &ColumnType) -> bool {
        match (self, ty) {
            (Value::Raw(b), ColumnType::Raw(n)) => b.len() == *n,
            (Value::I8(_), ColumnType::Scalar(ScalarType::Int8))
            | (Value::U8(_), ColumnType::Scalar(ScalarType::UInt8))
            | (Value::I16(_), ColumnType::Scalar(ScalarType::Int16))
            | (Value::U16(_), ColumnType::Scalar(ScalarType::UInt16))
            | (Value::I32(_), ColumnType::Scalar(ScalarType::Int32))
            | (Value::U32(_), ColumnType::Scalar(ScalarType::UInt32))
            | (Value::I64(_), ColumnType::Scalar(ScalarType::Int64))
            | (Value::U64(_), ColumnType::Scalar(ScalarType::UInt64))
            | (Value::F32(_), ColumnType::Scalar(ScalarType::Float))
            | (Value::F64(_), ColumnType::Scalar(ScalarType::Double))
            | (Value::Bool(_), ColumnType::Scalar(ScalarType::Bool))
            | (Value::Char(_), ColumnType::Scalar(ScalarType::Char)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Scalar(ScalarType),
    /// Undecoded bytes of the given length.
    Raw(usize),
}

impl ColumnType {
    pub fn size(&self) -> usize {
        match self {
            ColumnType::Scalar(s) => s.size(),
            ColumnType::Raw(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub timestamp_us: u64,
    pub values: Vec<Value>,
}

pub type SeriesKey = (String, u8);

/// All records of one subscribed topic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub message_name: String,
    pub multi_id: u8,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl TimeSeries {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column_index(name).is_some()
    }

    pub fn column_type(&self, name: &str) -> Option<&ColumnType> {
        self.column_index(name).map(|i| &self.columns[i].ty)
    }

    /// Numeric view of one column; `None` when the column does not exist.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r.values[i].as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    /// Appends a row, deriving `timestamp_us` from the `timestamp` column.
    pub fn push(&mut self, values: Vec<Value>) {
        let ts = self
            .column_index("timestamp")
            .and_then(|i| match values.get(i) {
                Some(Value::U64(t)) => Some(*t),
                _ => None,
            })
            .unwrap_or(0);
        self.rows.push(Row {
            timestamp_us: ts,
            values,
        });
    }
}

/// `'I'` info record. `type_name` is the declared type, e.g. `char[5]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoEntry {
    pub key: String,
    pub type_name: String,
    pub value: Vec<u8>,
}

impl InfoEntry {
    pub fn as_string(&self) -> Option<String> {
        if !self.type_name.starts_with("char[") {
            return None;
        }
        let end = self
            .value
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(self.value.len());
        Some(String::from_utf8_lossy(&self.value[..end]).into_owned())
    }

    pub fn as_u64(&self) -> Option<u64> {
        let ty = ScalarType::from_name(&self.type_name)?;
        if self.value.len() != ty.size() {
            return None;
        }
        match ty.decode(&self.value) {
            Value::U8(v) => Some(v as u64),
            Value::U16(v) => Some(v as u64),
            Value::U32(v) => Some(v as u64),
            Value::U64(v) => Some(v),
            Value::I32(v) if v >= 0 => Some(v as u64),
            Value::I64(v) if v >= 0 => Some(v as u64),
            _ => None,
        }
    }
}

/// `'M'` multi-info record; continuations concatenate onto the previous key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiInfoEntry {
    pub is_continued: bool,
    pub key: String,
    pub type_name: String,
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ParamValue {
    Int32(i32),
    Float32(f32),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int32(v) => v as f64,
            ParamValue::Float32(v) => v as f64,
        }
    }

    pub(crate) fn type_name(self) -> &'static str {
        match self {
            ParamValue::Int32(_) => "int32_t",
            ParamValue::Float32(_) => "float",
        }
    }

    pub(crate) fn to_le_bytes(self) -> [u8; 4] {
        match self {
            ParamValue::Int32(v) => v.to_le_bytes(),
            ParamValue::Float32(v) => v.to_le_bytes(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int32(v) => write!(f, "{v}"),
            ParamValue::Float32(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    ChangedInFlight,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamChange {
    pub timestamp_us: u64,
    pub name: String,
    pub value: ParamValue,
}

/// `'Q'` default-value record. Bit 0 of `default_types`: system default;
/// bit 1: current configuration (airframe) default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultParam {
    pub default_types: u8,
    pub name: String,
    pub value: ParamValue,
}

/// Resolved view of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub value: ParamValue,
    pub provenance: Provenance,
}

/// Parameter snapshots: values at log start, in-flight changes in order,
/// and declared defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterSet {
    pub initial: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub changes: Vec<ParamChange>,
    #[serde(default)]
    pub defaults: Vec<DefaultParam>,
}

impl ParameterSet {
    pub fn from_initial<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, ParamValue)>,
        S: Into<String>,
    {
        ParameterSet {
            initial: entries.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty() && self.changes.is_empty() && self.defaults.is_empty()
    }

    /// Effective value: the latest in-flight change, else the initial value,
    /// else the first declared default.
    pub fn get(&self, name: &str) -> Option<ParamEntry> {
        if let Some(c) = self.changes.iter().rev().find(|c| c.name == name) {
            return Some(ParamEntry {
                name: name.to_string(),
                value: c.value,
                provenance: Provenance::ChangedInFlight,
            });
        }
        if let Some(v) = self.initial.get(name) {
            return Some(ParamEntry {
                name: name.to_string(),
                value: *v,
                provenance: Provenance::Initial,
            });
        }
        self.defaults
            .iter()
            .find(|d| d.name == name)
            .map(|d| ParamEntry {
                name: name.to_string(),
                value: d.value,
                provenance: Provenance::Default,
            })
    }

    /// Every known name with its effective value, sorted by name.
    pub fn entries(&self) -> Vec<ParamEntry> {
        let mut names: Vec<&str> = self.initial.keys().map(String::as_str).collect();
        names.extend(self.changes.iter().map(|c| c.name.as_str()));
        names.extend(self.defaults.iter().map(|d| d.name.as_str()));
        names.sort_unstable();
        names.dedup();
        names.into_iter().filter_map(|n| self.get(n)).collect()
    }

    pub fn len(&self) -> usize {
        self.entries().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedText {
    pub timestamp_us: u64,
    /// ASCII syslog-style level, `b'0'` (emergency) to `b'7'` (debug).
    pub level: u8,
    pub tag: Option<u16>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropout {
    pub timestamp_us: u64,
    pub duration_ms: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum PartialReason {
    /// The stream ended inside the message starting at `offset`.
    Truncated { offset: u64 },
    /// Parsing stopped at `offset` because of incompatible flag bits.
    IncompatibleFlags { offset: u64 },
}

pub const MAX_WARNINGS: usize = 100;

/// Parse-time observations that do not prevent decoding.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DataQuality {
    pub partial: Option<PartialReason>,
    pub unknown_messages_skipped: u64,
    pub warnings: Vec<String>,
    pub suppressed_warnings: u64,
}

impl DataQuality {
    pub(crate) fn warn(&mut self, msg: String) {
        if self.warnings.len() < MAX_WARNINGS {
            self.warnings.push(msg);
        } else {
            self.suppressed_warnings += 1;
        }
    }

    pub fn is_partial(&self) -> bool {
        self.partial.is_some()
    }
}

/// A decoded flight log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightLog {
    pub header: UlogHeader,
    pub flags: Option<FlagBits>,
    pub formats: BTreeMap<String, MessageFormat>,
    pub info: Vec<InfoEntry>,
    pub multi_info: Vec<MultiInfoEntry>,
    pub parameters: ParameterSet,
    pub subscriptions: Vec<Subscription>,
    pub series: BTreeMap<SeriesKey, TimeSeries>,
    pub logged_text: Vec<LoggedText>,
    pub dropouts: Vec<Dropout>,
    pub quality: DataQuality,
}

impl FlightLog {
    pub fn info(&self, key: &str) -> Option<&InfoEntry> {
        self.info.iter().find(|e| e.key == key)
    }

    pub fn info_string(&self, key: &str) -> Option<String> {
        self.info(key).and_then(InfoEntry::as_string)
    }

    /// First instance (lowest multi_id) of a topic.
    pub fn series_named(&self, name: &str) -> Option<&TimeSeries> {
        self.series
            .range((name.to_string(), 0)..=(name.to_string(), u8::MAX))
            .next()
            .map(|(_, s)| s)
    }

    /// Smallest timestamp of any decoded data row.
    pub fn first_data_timestamp_us(&self) -> Option<u64> {
        self.series
            .values()
            .filter_map(|s| s.rows.first().map(|r| r.timestamp_us))
            .min()
    }

    /// Operating system and release, e.g. `NuttX, v11.0.0`.
    pub fn os_version(&self) -> Option<String> {
        let name = self.info_string("sys_os_name")?;
        match self.info("sys_os_ver_release").and_then(InfoEntry::as_u64) {
            Some(v) => Some(format!("{name}, {}", decode_release(v as u32))),
            None => Some(name),
        }
    }
}

/// Decodes the packed `0xMMmmpptt` release number into `vM.m.p`.
pub fn decode_release(v: u32) -> String {
    format!("v{}.{}.{}", v >> 24, (v >> 16) & 0xff, (v >> 8) & 0xff)
}

pub fn encode_release(major: u8, minor: u8, patch: u8, kind: u8) -> u32 {
    (major as u32) << 24 | (minor as u32) << 16 | (patch as u32) << 8 | kind as u32
}
