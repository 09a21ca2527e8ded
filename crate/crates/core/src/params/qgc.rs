//! Ground-station parameter dump: tab-separated
//! `vehicle_id component_id name value type`, `#` comments.
//! Type 9 is REAL32; integer types (1-6) are read as int32.

use crate::ulog::{ParamValue, ParameterSet};

use super::ParamFileError;

pub fn parse_qgc_params(text: &str) -> Result<ParameterSet, ParamFileError> {
    let mut set = ParameterSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| ParamFileError::Line {
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(err(format!("expected 5 columns, found {}", cols.len())));
        }
        let (name, value, ty) = (cols[2], cols[3], cols[4]);
        let ty: u8 = ty.parse().map_err(|_| err(format!("bad type {ty:?}")))?;
        let v = match ty {
            9 => ParamValue::Float32(
                value
                    .parse::<f32>()
                    .map_err(|_| err(format!("bad float {value:?}")))?,
            ),
            1..=6 => ParamValue::Int32(
                value
                    .parse::<i64>()
                    .ok()
                    .and_then(|v| i32::try_from(v).ok())
                    .ok_or_else(|| err(format!("bad integer {value:?}")))?,
            ),
            _ => return Err(err(format!("unsupported parameter type {ty}"))),
        };
        set.initial.insert(name.to_string(), v);
    }
    Ok(set)
}

pub fn render_qgc_params(set: &ParameterSet) -> String {
    let mut s = String::from("# Onboard parameters for Vehicle 1\n#\n# Vehicle-Id Component-Id Name Value Type\n");
    for (name, v) in &set.initial {
        let (value, ty) = match v {
            ParamValue::Int32(i) => (i.to_string(), 6),
            ParamValue::Float32(f) => (format!("{f:.18}"), 9),
        };
        s.push_str(&format!("1\t1\t{name}\t{value}\t{ty}\n"));
    }
    s
}
