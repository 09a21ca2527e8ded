use std::collections::HashMap;

use super::layout::{build_layout, Layout};
use super::types::*;
use super::UlogError;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Option<u8> {
        let b = *self.data.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.data.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.data[self.pos.min(self.data.len())..];
        self.pos = self.data.len();
        s
    }
}

/// Splits `"<type> <name>"`.
fn split_key(key: &[u8]) -> Option<(String, String)> {
    let s = std::str::from_utf8(key).ok()?;
    let (ty, name) = s.rsplit_once(' ')?;
    if ty.is_empty() || name.is_empty() {
        return None;
    }
    Some((ty.to_string(), name.to_string()))
}

fn parse_field_type(spec: &str) -> Option<(FieldType, Option<usize>)> {
    let (base, len) = match spec.split_once('[') {
        Some((b, rest)) => {
            let n: usize = rest.strip_suffix(']')?.parse().ok()?;
            if n == 0 || n > u16::MAX as usize {
                return None;
            }
            (b, Some(n))
        }
        None => (spec, None),
    };
    if base.is_empty() {
        return None;
    }
    let ty = match ScalarType::from_name(base) {
        Some(s) => FieldType::Scalar(s),
        None => FieldType::Nested(base.to_string()),
    };
    Some((ty, len))
}

pub(crate) fn parse_format(body: &[u8]) -> Result<MessageFormat, String> {
    let s = std::str::from_utf8(body).map_err(|_| "format is not UTF-8".to_string())?;
    let s = s.trim_end_matches('\0');
    let (name, fields_str) = s
        .split_once(':')
        .ok_or_else(|| format!("format without ':' separator: {s:?}"))?;
    if name.is_empty() {
        return Err("format with empty message name".into());
    }
    let mut fields = Vec::new();
    for part in fields_str.split(';').filter(|p| !p.is_empty()) {
        let (ty, fname) = part
            .rsplit_once(' ')
            .ok_or_else(|| format!("malformed field {part:?} in {name}"))?;
        let (ty, array_len) =
            parse_field_type(ty).ok_or_else(|| format!("bad field type {ty:?} in {name}"))?;
        fields.push(FieldDef {
            name: fname.to_string(),
            ty,
            array_len,
        });
    }
    Ok(MessageFormat {
        name: name.to_string(),
        fields,
    })
}

fn param_value(ty: &str, bytes: &[u8]) -> Option<ParamValue> {
    let b: [u8; 4] = bytes.try_into().ok()?;
    match ty {
        "int32_t" => Some(ParamValue::Int32(i32::from_le_bytes(b))),
        "float" => Some(ParamValue::Float32(f32::from_le_bytes(b))),
        _ => None,
    }
}

struct ActiveSub {
    key: SeriesKey,
    layout: Layout,
}

struct Parser<'a> {
    data: &'a [u8],
    log: FlightLog,
    in_data: bool,
    first_message: bool,
    last_ts: u64,
    active: HashMap<u16, ActiveSub>,
    layouts: HashMap<String, Option<Layout>>,
}

/// Decodes a complete ULog byte stream in one pass.
///
/// Only a bad magic or a stream shorter than the file header is an error.
/// Damaged or truncated streams yield a log whose `quality.partial` is set
/// and which holds every record decoded before the damage.
pub fn parse_ulog(bytes: &[u8]) -> Result<FlightLog, UlogError> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(UlogError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(UlogError::TruncatedHeader(bytes.len()));
    }
    let header = UlogHeader {
        version: bytes[7],
        start_timestamp_us: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
    };
    let mut p = Parser {
        data: bytes,
        log: FlightLog {
            header,
            ..Default::default()
        },
        in_data: false,
        first_message: true,
        last_ts: 0,
        active: HashMap::new(),
        layouts: HashMap::new(),
    };
    p.run();
    Ok(p.log)
}

impl<'a> Parser<'a> {
    fn run(&mut self) {
        let mut pos = HEADER_LEN;
        let mut end = self.data.len();
        while pos < end {
            if end - pos < 3 {
                self.log.quality.partial = Some(PartialReason::Truncated { offset: pos as u64 });
                return;
            }
            let size = u16::from_le_bytes([self.data[pos], self.data[pos + 1]]) as usize;
            let kind = self.data[pos + 2];
            let body_start = pos + 3;
            if body_start + size > end {
                self.log.quality.partial = Some(PartialReason::Truncated { offset: pos as u64 });
                return;
            }
            let body = &self.data[body_start..body_start + size];
            let was_first = self.first_message;
            self.first_message = false;
            match kind {
                b'B' => {
                    if !was_first {
                        self.log
                            .quality
                            .warn(format!("flag bits message at offset {pos} is not first; ignored"));
                    } else if let Some(stop) = self.flag_bits(body, body_start + size) {
                        if stop <= body_start + size {
                            self.log.quality.partial =
                                Some(PartialReason::IncompatibleFlags { offset: stop as u64 });
                            return;
                        }
                        end = end.min(stop);
                    }
                }
                b'F' => self.format(body, pos),
                b'I' => self.info(body, pos),
                b'M' => self.multi_info(body, pos),
                b'P' => self.parameter(body, pos),
                b'Q' => self.default_parameter(body, pos),
                b'A' => self.subscribe(body, pos),
                b'R' => {
                    self.in_data = true;
                    if let Some(id) = (Cursor { data: body, pos: 0 }).u16() {
                        self.active.remove(&id);
                    }
                }
                b'D' => self.data_record(body, pos),
                b'L' => self.logged(body, false, pos),
                b'C' => self.logged(body, true, pos),
                b'S' => self.in_data = true,
                b'O' => {
                    self.in_data = true;
                    match (Cursor { data: body, pos: 0 }).u16() {
                        Some(d) => self.log.dropouts.push(Dropout {
                            timestamp_us: self.last_ts,
                            duration_ms: d,
                        }),
                        None => self.log.quality.warn(format!("short dropout message at {pos}")),
                    }
                }
                _ => self.log.quality.unknown_messages_skipped += 1,
            }
            pos = body_start + size;
        }
        if end < self.data.len() {
            self.log.quality.partial = Some(PartialReason::IncompatibleFlags { offset: end as u64 });
        }
    }

    /// Returns the offset at which parsing must stop, if any.
    fn flag_bits(&mut self, body: &[u8], after: usize) -> Option<usize> {
        if body.len() < 40 {
            self.log
                .quality
                .warn(format!("flag bits message too short ({} bytes)", body.len()));
            return None;
        }
        let mut flags = FlagBits::default();
        flags.compat.copy_from_slice(&body[0..8]);
        flags.incompat.copy_from_slice(&body[8..16]);
        for i in 0..3 {
            let s = 16 + i * 8;
            flags.appended_offsets[i] = u64::from_le_bytes(body[s..s + 8].try_into().unwrap());
        }
        self.log.flags = Some(flags);
        let unknown_incompat = (flags.incompat[0] & !INCOMPAT_DATA_APPENDED) != 0
            || flags.incompat[1..].iter().any(|&b| b != 0);
        if unknown_incompat {
            self.log
                .quality
                .warn("unknown incompatible flag bits set; stopping".to_string());
            return Some(after);
        }
        if flags.incompat[0] & INCOMPAT_DATA_APPENDED != 0 && flags.appended_offsets[0] > 0 {
            self.log.quality.warn(format!(
                "appended data at offset {}; parsing stops there",
                flags.appended_offsets[0]
            ));
            return Some(usize::try_from(flags.appended_offsets[0]).unwrap_or(usize::MAX).max(after));
        }
        None
    }

    fn format(&mut self, body: &[u8], pos: usize) {
        match parse_format(body) {
            Ok(f) => {
                if self.log.formats.contains_key(&f.name) {
                    self.log
                        .quality
                        .warn(format!("format {:?} redefined at offset {pos}", f.name));
                }
                self.layouts.clear();
                self.log.formats.insert(f.name.clone(), f);
            }
            Err(e) => self.log.quality.warn(format!("offset {pos}: {e}")),
        }
    }

    fn key_value(&mut self, c: &mut Cursor<'a>, pos: usize) -> Option<(String, String, &'a [u8])> {
        let klen = c.u8()? as usize;
        let key = c.take(klen);
        let parsed = key.and_then(split_key);
        if parsed.is_none() {
            self.log.quality.warn(format!("malformed key at offset {pos}"));
        }
        let (ty, name) = parsed?;
        Some((ty, name, c.rest()))
    }

    fn info(&mut self, body: &'a [u8], pos: usize) {
        let mut c = Cursor { data: body, pos: 0 };
        if let Some((ty, key, value)) = self.key_value(&mut c, pos) {
            self.log.info.push(InfoEntry {
                key,
                type_name: ty,
                value: value.to_vec(),
            });
        }
    }

    fn multi_info(&mut self, body: &'a [u8], pos: usize) {
        let mut c = Cursor { data: body, pos: 0 };
        let Some(cont) = c.u8() else {
            self.log.quality.warn(format!("short multi-info at {pos}"));
            return;
        };
        if let Some((ty, key, value)) = self.key_value(&mut c, pos) {
            self.log.multi_info.push(MultiInfoEntry {
                is_continued: cont != 0,
                key,
                type_name: ty,
                value: value.to_vec(),
            });
        }
    }

    fn parameter(&mut self, body: &'a [u8], pos: usize) {
        let mut c = Cursor { data: body, pos: 0 };
        let Some((ty, name, value)) = self.key_value(&mut c, pos) else {
            return;
        };
        let Some(v) = param_value(&ty, value) else {
            self.log
                .quality
                .warn(format!("parameter {name:?} has unsupported type {ty:?}"));
            return;
        };
        if self.in_data {
            self.log.parameters.changes.push(ParamChange {
                timestamp_us: self.last_ts,
                name,
                value: v,
            });
        } else if self.log.parameters.initial.insert(name.clone(), v).is_some() {
            self.log
                .quality
                .warn(format!("initial parameter {name:?} repeated; last value kept"));
        }
    }

    fn default_parameter(&mut self, body: &'a [u8], pos: usize) {
        let mut c = Cursor { data: body, pos: 0 };
        let Some(bits) = c.u8() else {
            self.log.quality.warn(format!("short default parameter at {pos}"));
            return;
        };
        let Some((ty, name, value)) = self.key_value(&mut c, pos) else {
            return;
        };
        match param_value(&ty, value) {
            Some(v) => self.log.parameters.defaults.push(DefaultParam {
                default_types: bits,
                name,
                value: v,
            }),
            None => self
                .log
                .quality
                .warn(format!("default parameter {name:?} has unsupported type {ty:?}")),
        }
    }

    fn layout_for(&mut self, name: &str) -> Result<Layout, String> {
        if let Some(cached) = self.layouts.get(name) {
            return cached.clone().ok_or_else(|| format!("no usable layout for {name:?}"));
        }
        let built = build_layout(name, &self.log.formats);
        self.layouts.insert(name.to_string(), built.clone().ok());
        built
    }

    fn subscribe(&mut self, body: &[u8], pos: usize) {
        self.in_data = true;
        let mut c = Cursor { data: body, pos: 0 };
        let (Some(multi_id), Some(msg_id)) = (c.u8(), c.u16()) else {
            self.log.quality.warn(format!("short subscription at {pos}"));
            return;
        };
        let name = match std::str::from_utf8(c.rest()) {
            Ok(s) => s.trim_end_matches('\0').to_string(),
            Err(_) => {
                self.log.quality.warn(format!("subscription name not UTF-8 at {pos}"));
                return;
            }
        };
        let layout = match self.layout_for(&name) {
            Ok(l) => l,
            Err(e) => {
                self.log
                    .quality
                    .warn(format!("subscription {msg_id} ({name}) skipped: {e}"));
                return;
            }
        };
        if layout.raw_nesting {
            self.log.quality.warn(format!(
                "{name}: nesting deeper than one level recorded as raw bytes"
            ));
        }
        let key: SeriesKey = (name.clone(), multi_id);
        if let Some(existing) = self.log.series.get(&key) {
            if existing.columns != layout.columns {
                self.log.quality.warn(format!(
                    "subscription {msg_id} ({name}) conflicts with earlier layout; skipped"
                ));
                return;
            }
        }
        self.log.subscriptions.push(Subscription {
            msg_id,
            message_name: name.clone(),
            multi_id,
        });
        self.log
            .series
            .entry(key.clone())
            .or_insert_with(|| TimeSeries {
                message_name: name,
                multi_id,
                columns: layout.columns.clone(),
                rows: Vec::new(),
            });
        self.active.insert(msg_id, ActiveSub { key, layout });
    }

    fn data_record(&mut self, body: &[u8], pos: usize) {
        self.in_data = true;
        let mut c = Cursor { data: body, pos: 0 };
        let Some(msg_id) = c.u16() else {
            self.log.quality.warn(format!("short data message at {pos}"));
            return;
        };
        let Some(sub) = self.active.get(&msg_id) else {
            self.log
                .quality
                .warn(format!("data for unsubscribed msg_id {msg_id} at offset {pos}"));
            return;
        };
        let payload = c.rest();
        if payload.len() < sub.layout.size {
            self.log.quality.warn(format!(
                "data for {} at offset {pos} is {} bytes, format needs {}",
                sub.key.0,
                payload.len(),
                sub.layout.size
            ));
            return;
        }
        let values = sub.layout.decode(payload);
        let ts = match sub.layout.timestamp_col.map(|i| &values[i]) {
            Some(Value::U64(t)) => *t,
            _ => self.last_ts,
        };
        let key = sub.key.clone();
        let series = self.log.series.get_mut(&key).expect("series created on subscribe");
        if let Some(prev) = series.rows.last() {
            if ts < prev.timestamp_us {
                let msg = format!(
                    "{}[{}]: timestamp {} after {} (non-monotonic) at offset {pos}",
                    key.0, key.1, ts, prev.timestamp_us
                );
                self.log.quality.warn(msg);
            }
        }
        series.rows.push(Row {
            timestamp_us: ts,
            values,
        });
        self.last_ts = ts;
    }

    fn logged(&mut self, body: &[u8], tagged: bool, pos: usize) {
        self.in_data = true;
        let mut c = Cursor { data: body, pos: 0 };
        let level = c.u8();
        let tag = if tagged { c.u16().map(Some) } else { Some(None) };
        let ts = c.u64();
        let (Some(level), Some(tag), Some(ts)) = (level, tag, ts) else {
            self.log.quality.warn(format!("short logged message at {pos}"));
            return;
        };
        let text = String::from_utf8_lossy(c.rest()).into_owned();
        self.log.logged_text.push(LoggedText {
            timestamp_us: ts,
            level,
            tag,
            text,
        });
        self.last_ts = ts;
    }
}
