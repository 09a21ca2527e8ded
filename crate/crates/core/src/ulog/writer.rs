use std::collections::{BTreeSet, HashSet};

use super::layout::build_layout;
use super::parser::parse_format;
use super::types::*;
use super::UlogError;

fn invalid(msg: impl Into<String>) -> UlogError {
    UlogError::Invalid(msg.into())
}

fn message(out: &mut Vec<u8>, kind: u8, body: &[u8]) -> Result<(), UlogError> {
    let size = u16::try_from(body.len())
        .map_err(|_| invalid(format!("'{}' message body of {} bytes", kind as char, body.len())))?;
    out.extend_from_slice(&size.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(body);
    Ok(())
}

fn key_bytes(type_name: &str, name: &str) -> Result<Vec<u8>, UlogError> {
    if name.is_empty() || name.contains(' ') || type_name.is_empty() || type_name.contains(' ') {
        return Err(invalid(format!("invalid key {type_name:?} {name:?}")));
    }
    let key = format!("{type_name} {name}");
    let len = u8::try_from(key.len()).map_err(|_| invalid(format!("key too long: {key:?}")))?;
    let mut out = vec![len];
    out.extend_from_slice(key.as_bytes());
    Ok(out)
}

fn param_body(name: &str, value: ParamValue) -> Result<Vec<u8>, UlogError> {
    let mut body = key_bytes(value.type_name(), name)?;
    body.extend_from_slice(&value.to_le_bytes());
    Ok(body)
}

enum Event<'a> {
    Data(Vec<u8>),
    Text(&'a LoggedText),
    Change(&'a ParamChange),
    Dropout(&'a Dropout),
}

/// Serializes a log. Output parses back to an equal [`FlightLog`].
///
/// Records inside the data section are emitted in timestamp order. In-flight
/// parameter changes and dropouts carry no timestamp of their own on disk;
/// they inherit the timestamp of the preceding data or text record, so
/// theirs must be 0 or equal to the timestamp of some such record.
pub fn write_ulog(log: &FlightLog) -> Result<Vec<u8>, UlogError> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(log.header.version);
    out.extend_from_slice(&log.header.start_timestamp_us.to_le_bytes());

    if let Some(flags) = &log.flags {
        let mut body = Vec::with_capacity(40);
        body.extend_from_slice(&flags.compat);
        body.extend_from_slice(&flags.incompat);
        for off in flags.appended_offsets {
            body.extend_from_slice(&off.to_le_bytes());
        }
        message(&mut out, b'B', &body)?;
    }

    for (name, fmt) in &log.formats {
        if name != &fmt.name {
            return Err(invalid(format!("format keyed {name:?} is named {:?}", fmt.name)));
        }
        let def = fmt.definition();
        if parse_format(def.as_bytes()).as_ref() != Ok(fmt) {
            return Err(invalid(format!("format {name:?} does not survive encoding")));
        }
        message(&mut out, b'F', def.as_bytes())?;
    }
    for e in &log.info {
        let mut body = key_bytes(&e.type_name, &e.key)?;
        body.extend_from_slice(&e.value);
        message(&mut out, b'I', &body)?;
    }
    for e in &log.multi_info {
        let mut body = vec![e.is_continued as u8];
        body.extend(key_bytes(&e.type_name, &e.key)?);
        body.extend_from_slice(&e.value);
        message(&mut out, b'M', &body)?;
    }
    for (name, value) in &log.parameters.initial {
        message(&mut out, b'P', &param_body(name, *value)?)?;
    }
    for d in &log.parameters.defaults {
        let mut body = vec![d.default_types];
        body.extend(param_body(&d.name, d.value)?);
        message(&mut out, b'Q', &body)?;
    }

    // Subscriptions and their layouts.
    let mut ids = HashSet::new();
    let mut keys = HashSet::new();
    let mut events: Vec<(u64, u8, Event)> = Vec::new();
    for sub in &log.subscriptions {
        if !ids.insert(sub.msg_id) {
            return Err(invalid(format!("duplicate msg_id {}", sub.msg_id)));
        }
        let key: SeriesKey = (sub.message_name.clone(), sub.multi_id);
        if !keys.insert(key.clone()) {
            return Err(invalid(format!("duplicate subscription {key:?}")));
        }
        let layout = build_layout(&sub.message_name, &log.formats).map_err(invalid)?;
        let ts_col = layout
            .timestamp_col
            .ok_or_else(|| invalid(format!("{} has no uint64_t timestamp field", sub.message_name)))?;
        let series = log
            .series
            .get(&key)
            .ok_or_else(|| invalid(format!("subscription {key:?} has no series")))?;
        if series.columns != layout.columns
            || series.message_name != sub.message_name
            || series.multi_id != sub.multi_id
        {
            return Err(invalid(format!("series {key:?} does not match its format")));
        }
        let mut prev = 0u64;
        for (i, row) in series.rows.iter().enumerate() {
            if row.values.len() != layout.columns.len()
                || !row.values.iter().zip(&layout.columns).all(|(v, c)| v.matches(&c.ty))
            {
                return Err(invalid(format!("{key:?} row {i} does not match columns")));
            }
            if row.values[ts_col] != Value::U64(row.timestamp_us) {
                return Err(invalid(format!("{key:?} row {i} timestamp mismatch")));
            }
            if row.timestamp_us < prev {
                return Err(invalid(format!("{key:?} row {i} timestamp decreases")));
            }
            prev = row.timestamp_us;
            let mut payload = sub.msg_id.to_le_bytes().to_vec();
            payload.extend(layout.encode(&row.values));
            events.push((row.timestamp_us, 0, Event::Data(payload)));
        }
    }
    if let Some(k) = log.series.keys().find(|k| !keys.contains(*k)) {
        return Err(invalid(format!("series {k:?} has no subscription")));
    }
    if log.logged_text.windows(2).any(|w| w[1].timestamp_us < w[0].timestamp_us) {
        return Err(invalid("logged text timestamps decrease"));
    }
    for t in &log.logged_text {
        events.push((t.timestamp_us, 0, Event::Text(t)));
    }
    let anchors: BTreeSet<u64> = events.iter().map(|(t, _, _)| *t).collect();
    let anchored = |t: u64| t == 0 || anchors.contains(&t);
    for c in &log.parameters.changes {
        if !anchored(c.timestamp_us) {
            return Err(invalid(format!(
                "parameter change {:?} at {} has no record with that timestamp",
                c.name, c.timestamp_us
            )));
        }
        events.push((c.timestamp_us, 1, Event::Change(c)));
    }
    for d in &log.dropouts {
        if !anchored(d.timestamp_us) {
            return Err(invalid(format!(
                "dropout at {} has no record with that timestamp",
                d.timestamp_us
            )));
        }
        events.push((d.timestamp_us, 1, Event::Dropout(d)));
    }
    events.sort_by_key(|(t, rank, _)| (*t, *rank));

    for sub in &log.subscriptions {
        let mut body = vec![sub.multi_id];
        body.extend_from_slice(&sub.msg_id.to_le_bytes());
        body.extend_from_slice(sub.message_name.as_bytes());
        message(&mut out, b'A', &body)?;
    }
    if log.subscriptions.is_empty() && !log.parameters.changes.is_empty() {
        message(&mut out, b'S', &SYNC_MAGIC)?;
    }
    for (_, _, ev) in events {
        match ev {
            Event::Data(payload) => message(&mut out, b'D', &payload)?,
            Event::Text(t) => {
                let mut body = vec![t.level];
                let kind = match t.tag {
                    Some(tag) => {
                        body.extend_from_slice(&tag.to_le_bytes());
                        b'C'
                    }
                    None => b'L',
                };
                body.extend_from_slice(&t.timestamp_us.to_le_bytes());
                body.extend_from_slice(t.text.as_bytes());
                message(&mut out, kind, &body)?;
            }
            Event::Change(c) => message(&mut out, b'P', &param_body(&c.name, c.value)?)?,
            Event::Dropout(d) => message(&mut out, b'O', &d.duration_ms.to_le_bytes())?,
        }
    }
    Ok(out)
}
