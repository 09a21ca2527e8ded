//! Reader and writer for the ULog binary flight-log format.
//!
//! Layout: a 16-byte file header (7-byte magic, version byte, u64 start
//! timestamp) followed by messages, each framed as `u16 size, u8 type,
//! payload[size]`. Definitions (`B F I M P Q`) precede the data section
//! (`A R D L C S O`, plus `P` for in-flight parameter changes). All integers
//! are little-endian.

mod layout;
mod parser;
mod types;
mod writer;

use thiserror::Error;

pub use parser::parse_ulog;
pub use types::*;
pub use writer::write_ulog;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UlogError {
    #[error("not a ULog stream (bad magic)")]
    BadMagic,
    #[error("stream too short for file header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("invalid log for writing: {0}")]
    Invalid(String),
}

/// Initial values, in-flight changes and defaults recorded in the log.
pub fn extract_parameters(log: &FlightLog) -> ParameterSet {
    log.parameters.clone()
}

/// Dropout records in file order.
pub fn detect_dropouts(log: &FlightLog) -> Vec<Dropout> {
    log.dropouts.clone()
}

/// Incremental construction of a valid [`FlightLog`], mainly for fixtures.
#[derive(Debug, Clone, Default)]
pub struct LogBuilder {
    log: FlightLog,
    next_msg_id: u16,
}

impl LogBuilder {
    pub fn new(start_timestamp_us: u64) -> Self {
        LogBuilder {
            log: FlightLog {
                header: UlogHeader {
                    version: 1,
                    start_timestamp_us,
                },
                ..Default::default()
            },
            next_msg_id: 0,
        }
    }

    pub fn info_str(mut self, key: &str, value: &str) -> Self {
        self.log.info.push(InfoEntry {
            key: key.into(),
            type_name: format!("char[{}]", value.len()),
            value: value.as_bytes().to_vec(),
        });
        self
    }

    pub fn info_u32(mut self, key: &str, value: u32) -> Self {
        self.log.info.push(InfoEntry {
            key: key.into(),
            type_name: "uint32_t".into(),
            value: value.to_le_bytes().to_vec(),
        });
        self
    }

    pub fn info_u64(mut self, key: &str, value: u64) -> Self {
        self.log.info.push(InfoEntry {
            key: key.into(),
            type_name: "uint64_t".into(),
            value: value.to_le_bytes().to_vec(),
        });
        self
    }

    pub fn param(mut self, name: &str, value: ParamValue) -> Self {
        self.log.parameters.initial.insert(name.into(), value);
        self
    }

    pub fn param_change(mut self, timestamp_us: u64, name: &str, value: ParamValue) -> Self {
        self.log.parameters.changes.push(ParamChange {
            timestamp_us,
            name: name.into(),
            value,
        });
        self
    }

    pub fn format(mut self, name: &str, fields: Vec<FieldDef>) -> Self {
        self.log.formats.insert(
            name.into(),
            MessageFormat {
                name: name.into(),
                fields,
            },
        );
        self
    }

    /// Adds a subscription and an empty series; the format must exist.
    pub fn subscribe(&mut self, name: &str, multi_id: u8) -> Result<SeriesKey, UlogError> {
        let layout = layout::build_layout(name, &self.log.formats).map_err(UlogError::Invalid)?;
        let msg_id = self.next_msg_id;
        self.next_msg_id += 1;
        self.log.subscriptions.push(Subscription {
            msg_id,
            message_name: name.into(),
            multi_id,
        });
        let key = (name.to_string(), multi_id);
        self.log.series.insert(
            key.clone(),
            TimeSeries {
                message_name: name.into(),
                multi_id,
                columns: layout.columns,
                rows: Vec::new(),
            },
        );
        Ok(key)
    }

    pub fn push(&mut self, key: &SeriesKey, values: Vec<Value>) {
        if let Some(s) = self.log.series.get_mut(key) {
            s.push(values);
        }
    }

    pub fn text(mut self, timestamp_us: u64, level: u8, text: &str) -> Self {
        self.log.logged_text.push(LoggedText {
            timestamp_us,
            level,
            tag: None,
            text: text.into(),
        });
        self
    }

    pub fn dropout(mut self, timestamp_us: u64, duration_ms: u16) -> Self {
        self.log.dropouts.push(Dropout {
            timestamp_us,
            duration_ms,
        });
        self
    }

    pub fn build(self) -> FlightLog {
        self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> FlightLog {
        let mut b = LogBuilder::new(1_000).param("MPC_XY_CRUISE", ParamValue::Float32(5.0)).format(
            "vehicle_status",
            vec![
                FieldDef::scalar(ScalarType::UInt64, "timestamp"),
                FieldDef::scalar(ScalarType::UInt8, "arming_state"),
            ],
        );
        let k = b.subscribe("vehicle_status", 0).unwrap();
        b.push(&k, vec![Value::U64(10), Value::U8(1)]);
        b.push(&k, vec![Value::U64(20), Value::U8(2)]);
        b.build()
    }

    #[test]
    fn minimal_log_round_trip() {
        let log = minimal();
        let bytes = write_ulog(&log).unwrap();
        let back = parse_ulog(&bytes).unwrap();
        assert_eq!(back.parameters.len(), 1);
        assert_eq!(back.series.len(), 1);
        assert_eq!(back.series.values().next().unwrap().rows.len(), 2);
        assert_eq!(back, log);
    }

    #[test]
    fn header_only_log() {
        let log = LogBuilder::new(0x0102_0304).build();
        let bytes = write_ulog(&log).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[..7], &MAGIC);
        assert_eq!(bytes[7], 1);
        assert_eq!(&bytes[8..], &0x0102_0304u64.to_le_bytes());
        assert_eq!(parse_ulog(&bytes).unwrap(), log);
    }

    #[test]
    fn bad_magic() {
        assert_eq!(parse_ulog(&[0u8; 32]), Err(UlogError::BadMagic));
        assert_eq!(parse_ulog(&[]), Err(UlogError::BadMagic));
        assert_eq!(parse_ulog(&MAGIC), Err(UlogError::TruncatedHeader(7)));
    }

    #[test]
    fn truncated_final_message_keeps_prior_rows() {
        let bytes = write_ulog(&minimal()).unwrap();
        // The last message is the second 'D' record: 3-byte header + 2 + 9.
        let last_len = 3 + 2 + 9;
        let cut = bytes.len() - last_len / 2;
        let log = parse_ulog(&bytes[..cut]).unwrap();
        assert_eq!(
            log.quality.partial,
            Some(PartialReason::Truncated {
                offset: (bytes.len() - last_len) as u64
            })
        );
        let s = log.series.values().next().unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.rows[0].values, vec![Value::U64(10), Value::U8(1)]);
    }

    #[test]
    fn parameters_initial_and_changed() {
        let no_params = LogBuilder::new(0).build();
        assert!(extract_parameters(&no_params).is_empty());

        let mut b = LogBuilder::new(0)
            .param("MPC_XY_CRUISE", ParamValue::Float32(5.0))
            .format("t", vec![FieldDef::scalar(ScalarType::UInt64, "timestamp")]);
        let k = b.subscribe("t", 0).unwrap();
        b.push(&k, vec![Value::U64(5_000_000)]);
        let log = b
            .param_change(5_000_000, "MPC_XY_CRUISE", ParamValue::Float32(2.0))
            .build();
        let parsed = parse_ulog(&write_ulog(&log).unwrap()).unwrap();
        let params = extract_parameters(&parsed);
        assert_eq!(params.initial["MPC_XY_CRUISE"], ParamValue::Float32(5.0));
        let e = params.get("MPC_XY_CRUISE").unwrap();
        assert_eq!(e.value, ParamValue::Float32(2.0));
        assert_eq!(e.provenance, Provenance::ChangedInFlight);
        assert_eq!(params.changes[0].timestamp_us, 5_000_000);
    }

    #[test]
    fn dropouts_in_order() {
        let base = || {
            let mut b = LogBuilder::new(0)
                .format("t", vec![FieldDef::scalar(ScalarType::UInt64, "timestamp")]);
            let k = b.subscribe("t", 0).unwrap();
            for ts in [500_000u64, 1_000_000, 2_000_000] {
                b.push(&k, vec![Value::U64(ts)]);
            }
            b
        };
        let none = parse_ulog(&write_ulog(&base().build()).unwrap()).unwrap();
        assert!(detect_dropouts(&none).is_empty());

        let one = base().dropout(1_000_000, 250).build();
        let one = parse_ulog(&write_ulog(&one).unwrap()).unwrap();
        assert_eq!(
            detect_dropouts(&one),
            vec![Dropout {
                timestamp_us: 1_000_000,
                duration_ms: 250
            }]
        );

        let two = base().dropout(1_000_000, 250).dropout(2_000_000, 40).build();
        let two = parse_ulog(&write_ulog(&two).unwrap()).unwrap();
        let d: Vec<_> = detect_dropouts(&two)
            .iter()
            .map(|d| (d.timestamp_us, d.duration_ms))
            .collect();
        assert_eq!(d, vec![(1_000_000, 250), (2_000_000, 40)]);
    }

    #[test]
    fn unanchored_dropout_is_rejected_by_writer() {
        let log = LogBuilder::new(0).dropout(7, 1).build();
        assert!(matches!(write_ulog(&log), Err(UlogError::Invalid(_))));
    }

    #[test]
    fn unknown_message_types_are_counted() {
        let mut bytes = write_ulog(&minimal()).unwrap();
        bytes.extend_from_slice(&[2, 0, b'Z', 0xAA, 0xBB]);
        let log = parse_ulog(&bytes).unwrap();
        assert_eq!(log.quality.unknown_messages_skipped, 1);
        assert!(log.quality.partial.is_none());
    }

    #[test]
    fn non_monotonic_rows_warn() {
        let mut log = minimal();
        let s = log.series.values_mut().next().unwrap();
        s.rows.swap(0, 1);
        // Writer refuses decreasing timestamps; build the stream by hand.
        assert!(write_ulog(&log).is_err());
        let mut bytes = write_ulog(&minimal()).unwrap();
        let n = bytes.len();
        let first = n - 2 * 14;
        let (a, b) = bytes[first..].split_at_mut(14);
        a.swap_with_slice(b);
        let parsed = parse_ulog(&bytes).unwrap();
        assert!(parsed.quality.warnings.iter().any(|w| w.contains("non-monotonic")));
    }

    #[test]
    fn incompatible_flags_stop_parsing() {
        let mut log = minimal();
        log.flags = Some(FlagBits {
            incompat: [0x02, 0, 0, 0, 0, 0, 0, 0],
            ..Default::default()
        });
        let bytes = write_ulog(&log).unwrap();
        let parsed = parse_ulog(&bytes).unwrap();
        assert_eq!(
            parsed.quality.partial,
            Some(PartialReason::IncompatibleFlags {
                offset: (HEADER_LEN + 3 + 40) as u64
            })
        );
        assert!(parsed.series.is_empty());
    }

    #[test]
    fn appended_data_offset_is_honored() {
        let plain = write_ulog(&minimal()).unwrap();
        let mut log = minimal();
        // Stop right before the last data record (shifted by the 43-byte B message).
        let stop = plain.len() + 43 - 14;
        log.flags = Some(FlagBits {
            incompat: [INCOMPAT_DATA_APPENDED, 0, 0, 0, 0, 0, 0, 0],
            appended_offsets: [stop as u64, 0, 0],
            ..Default::default()
        });
        let bytes = write_ulog(&log).unwrap();
        let parsed = parse_ulog(&bytes).unwrap();
        assert_eq!(
            parsed.quality.partial,
            Some(PartialReason::IncompatibleFlags { offset: stop as u64 })
        );
        assert_eq!(parsed.series.values().next().unwrap().rows.len(), 1);
    }

    #[test]
    fn release_encoding() {
        assert_eq!(decode_release(encode_release(11, 0, 0, 0xff)), "v11.0.0");
    }
}
