//! Maps a format definition onto flat scalar columns and byte offsets.
//!
//! Nested message types are flattened one level (`name.sub`, `name[i].sub`).
//! A nested type that itself contains nested types becomes a single raw
//! column covering its bytes.

use std::collections::{BTreeMap, HashSet};

use super::types::{Column, ColumnType, FieldType, MessageFormat, Value};

const MAX_NESTING: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub columns: Vec<Column>,
    pub offsets: Vec<usize>,
    pub size: usize,
    pub timestamp_col: Option<usize>,
    pub raw_nesting: bool,
}

impl Layout {
    pub fn decode(&self, data: &[u8]) -> Vec<Value> {
        self.columns
            .iter()
            .zip(&self.offsets)
            .map(|(c, &off)| match &c.ty {
                ColumnType::Scalar(s) => s.decode(&data[off..off + s.size()]),
                ColumnType::Raw(n) => Value::Raw(data[off..off + n].to_vec()),
            })
            .collect()
    }

    pub fn encode(&self, values: &[Value]) -> Vec<u8> {
        let mut out = vec![0u8; self.size];
        for ((c, &off), v) in self.columns.iter().zip(&self.offsets).zip(values) {
            let mut buf = Vec::with_capacity(c.ty.size());
            v.encode_into(&mut buf);
            out[off..off + buf.len()].copy_from_slice(&buf);
        }
        out
    }
}

pub(crate) fn size_of(
    name: &str,
    formats: &BTreeMap<String, MessageFormat>,
    visiting: &mut HashSet<String>,
) -> Result<usize, String> {
    if visiting.len() > MAX_NESTING || !visiting.insert(name.to_string()) {
        return Err(format!("recursive or too deeply nested type {name:?}"));
    }
    let fmt = formats
        .get(name)
        .ok_or_else(|| format!("undefined type {name:?}"))?;
    let mut total = 0usize;
    for f in &fmt.fields {
        let one = match &f.ty {
            FieldType::Scalar(s) => s.size(),
            FieldType::Nested(n) => size_of(n, formats, visiting)?,
        };
        total = total
            .checked_add(one.checked_mul(f.array_len.unwrap_or(1)).ok_or("size overflow")?)
            .ok_or("size overflow")?;
    }
    visiting.remove(name);
    Ok(total)
}

pub(crate) fn build_layout(
    name: &str,
    formats: &BTreeMap<String, MessageFormat>,
) -> Result<Layout, String> {
    let fmt = formats
        .get(name)
        .ok_or_else(|| format!("no format definition for {name:?}"))?;
    let mut layout = Layout {
        columns: Vec::new(),
        offsets: Vec::new(),
        size: 0,
        timestamp_col: None,
        raw_nesting: false,
    };
    let mut off = 0usize;
    for field in &fmt.fields {
        let count = field.array_len.unwrap_or(1);
        for i in 0..count {
            let label = match field.array_len {
                Some(_) => format!("{}[{}]", field.name, i),
                None => field.name.clone(),
            };
            match &field.ty {
                FieldType::Scalar(s) => {
                    if !field.is_padding() {
                        layout.columns.push(Column {
                            name: label,
                            ty: ColumnType::Scalar(*s),
                        });
                        layout.offsets.push(off);
                    }
                    off += s.size();
                }
                FieldType::Nested(inner_name) => {
                    let mut visiting = HashSet::from([name.to_string()]);
                    let inner_size = size_of(inner_name, formats, &mut visiting)?;
                    let inner = &formats[inner_name];
                    let flat = inner
                        .fields
                        .iter()
                        .all(|f| matches!(f.ty, FieldType::Scalar(_)));
                    if flat {
                        let mut inner_off = off;
                        for f in &inner.fields {
                            let FieldType::Scalar(s) = f.ty else { unreachable!() };
                            for j in 0..f.array_len.unwrap_or(1) {
                                if !f.is_padding() {
                                    let sub = match f.array_len {
                                        Some(_) => format!("{label}.{}[{j}]", f.name),
                                        None => format!("{label}.{}", f.name),
                                    };
                                    layout.columns.push(Column {
                                        name: sub,
                                        ty: ColumnType::Scalar(s),
                                    });
                                    layout.offsets.push(inner_off);
                                }
                                inner_off += s.size();
                            }
                        }
                    } else {
                        layout.raw_nesting = true;
                        layout.columns.push(Column {
                            name: label,
                            ty: ColumnType::Raw(inner_size),
                        });
                        layout.offsets.push(off);
                    }
                    off += inner_size;
                }
            }
        }
    }
    layout.size = off;
    layout.timestamp_col = layout.columns.iter().position(|c| {
        c.name == "timestamp" && c.ty == ColumnType::Scalar(super::types::ScalarType::UInt64)
    });
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ulog::types::{FieldDef, ScalarType};

    fn fmt(name: &str, fields: Vec<FieldDef>) -> (String, MessageFormat) {
        (
            name.to_string(),
            MessageFormat {
                name: name.to_string(),
                fields,
            },
        )
    }

    fn nested(ty: &str, name: &str, len: Option<usize>) -> FieldDef {
        FieldDef {
            name: name.into(),
            ty: FieldType::Nested(ty.into()),
            array_len: len,
        }
    }

    #[test]
    fn arrays_padding_and_one_level_nesting() {
        let formats: BTreeMap<_, _> = [
            fmt(
                "esc",
                vec![
                    FieldDef::scalar(ScalarType::UInt16, "rpm"),
                    FieldDef::array(ScalarType::UInt8, "_padding0", 2),
                ],
            ),
            fmt(
                "top",
                vec![
                    FieldDef::scalar(ScalarType::UInt64, "timestamp"),
                    FieldDef::array(ScalarType::Float, "q", 4),
                    nested("esc", "esc", Some(2)),
                ],
            ),
        ]
        .into_iter()
        .collect();
        let l = build_layout("top", &formats).unwrap();
        let names: Vec<_> = l.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            ["timestamp", "q[0]", "q[1]", "q[2]", "q[3]", "esc[0].rpm", "esc[1].rpm"]
        );
        assert_eq!(l.offsets, [0, 8, 12, 16, 20, 24, 28]);
        assert_eq!(l.size, 32);
        assert_eq!(l.timestamp_col, Some(0));
        assert!(!l.raw_nesting);
    }

    #[test]
    fn deep_nesting_is_raw() {
        let formats: BTreeMap<_, _> = [
            fmt("leaf", vec![FieldDef::scalar(ScalarType::UInt32, "v")]),
            fmt("mid", vec![nested("leaf", "leaf", None)]),
            fmt(
                "top",
                vec![
                    FieldDef::scalar(ScalarType::UInt64, "timestamp"),
                    nested("mid", "m", None),
                ],
            ),
        ]
        .into_iter()
        .collect();
        let l = build_layout("top", &formats).unwrap();
        assert!(l.raw_nesting);
        assert_eq!(l.columns[1].ty, ColumnType::Raw(4));
    }

    #[test]
    fn cycles_are_rejected() {
        let formats: BTreeMap<_, _> = [
            fmt("a", vec![nested("b", "b", None)]),
            fmt("b", vec![nested("a", "a", None)]),
        ]
        .into_iter()
        .collect();
        assert!(build_layout("a", &formats).is_err());
    }
}
