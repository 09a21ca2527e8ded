use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use uavforensics::ulog::*;

const SCALARS: [ScalarType; 12] = [
    ScalarType::Int8,
    ScalarType::UInt8,
    ScalarType::Int16,
    ScalarType::UInt16,
    ScalarType::Int32,
    ScalarType::UInt32,
    ScalarType::Int64,
    ScalarType::UInt64,
    ScalarType::Float,
    ScalarType::Double,
    ScalarType::Bool,
    ScalarType::Char,
];

fn random_value(rng: &mut StdRng, ty: ScalarType) -> Value {
    match ty {
        ScalarType::Int8 => Value::I8(rng.gen()),
        ScalarType::UInt8 => Value::U8(rng.gen()),
        ScalarType::Int16 => Value::I16(rng.gen()),
        ScalarType::UInt16 => Value::U16(rng.gen()),
        ScalarType::Int32 => Value::I32(rng.gen()),
        ScalarType::UInt32 => Value::U32(rng.gen()),
        ScalarType::Int64 => Value::I64(rng.gen()),
        ScalarType::UInt64 => Value::U64(rng.gen()),
        ScalarType::Float => Value::F32(rng.gen_range(-1e6f32..1e6)),
        ScalarType::Double => Value::F64(rng.gen_range(-1e9..1e9)),
        ScalarType::Bool => Value::Bool(rng.gen()),
        ScalarType::Char => Value::Char(rng.gen_range(b'a'..=b'z')),
    }
}

fn random_param(rng: &mut StdRng) -> ParamValue {
    if rng.gen() {
        ParamValue::Int32(rng.gen())
    } else {
        ParamValue::Float32(rng.gen_range(-1000f32..1000.0))
    }
}

/// A random log satisfying every writer invariant.
pub fn random_log(seed: u64) -> FlightLog {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut b = LogBuilder::new(rng.gen_range(0..10_000_000));
    for i in 0..rng.gen_range(0..3) {
        b = b.info_str(&format!("info_{i}"), "px4");
    }
    b = b.info_u32("sys_os_ver_release", encode_release(11, 0, 0, 255));
    for i in 0..rng.gen_range(0..6) {
        let v = random_param(&mut rng);
        b = b.param(&format!("PARAM_{i}"), v);
    }

    let with_nested = rng.gen_bool(0.5);
    if with_nested {
        b = b.format(
            "inner",
            vec![
                FieldDef::scalar(ScalarType::Float, "a"),
                FieldDef::array(ScalarType::UInt8, "_padding0", 3),
                FieldDef::array(ScalarType::Int16, "b", 2),
            ],
        );
    }
    let n_formats = rng.gen_range(1..4);
    for f in 0..n_formats {
        let mut fields = vec![FieldDef::scalar(ScalarType::UInt64, "timestamp")];
        for j in 0..rng.gen_range(0..5) {
            let ty = SCALARS[rng.gen_range(0..SCALARS.len())];
            if rng.gen_bool(0.3) {
                fields.push(FieldDef::array(ty, &format!("f{j}"), rng.gen_range(1..4)));
            } else {
                fields.push(FieldDef::scalar(ty, &format!("f{j}")));
            }
        }
        if with_nested && rng.gen_bool(0.5) {
            fields.push(FieldDef {
                name: "nest".into(),
                ty: FieldType::Nested("inner".into()),
                array_len: Some(2),
            });
        }
        b = b.format(&format!("topic_{f}"), fields);
    }

    let mut keys = Vec::new();
    for f in 0..n_formats {
        for multi in 0..rng.gen_range(1..3u8) {
            keys.push(b.subscribe(&format!("topic_{f}"), multi).unwrap());
        }
    }
    let mut anchors = vec![0u64];
    for key in &keys {
        let mut t = rng.gen_range(0..1_000_000u64);
        for _ in 0..rng.gen_range(0..30) {
            t += rng.gen_range(0..200_000);
            anchors.push(t);
            let log_now = b.clone().build();
            let cols = &log_now.series[key].columns;
            let values = cols
                .iter()
                .map(|c| match (&c.name[..], &c.ty) {
                    ("timestamp", _) => Value::U64(t),
                    (_, ColumnType::Scalar(s)) => random_value(&mut rng, *s),
                    (_, ColumnType::Raw(n)) => Value::Raw(vec![0; *n]),
                })
                .collect();
            b.push(key, values);
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        let t = rng.gen_range(0..3_000_000u64);
        anchors.push(t);
        b = b.text(t, b'0' + rng.gen_range(0..8), "logged message");
    }
    anchors.sort_unstable();
    for i in 0..rng.gen_range(0..3) {
        let t = anchors[rng.gen_range(0..anchors.len())];
        let v = random_param(&mut rng);
        b = b.param_change(t, &format!("PARAM_{i}"), v);
    }
    for _ in 0..rng.gen_range(0..3) {
        let t = anchors[rng.gen_range(0..anchors.len())];
        b = b.dropout(t, rng.gen());
    }
    let mut log = b.build();
    if rng.gen_bool(0.3) {
        log.flags = Some(FlagBits {
            compat: [rng.gen(), 0, 0, 0, 0, 0, 0, 0],
            ..Default::default()
        });
    }
    // Dropout and change order is only defined per timestamp.
    log.logged_text.sort_by_key(|t| t.timestamp_us);
    log.dropouts.sort_by_key(|d| d.timestamp_us);
    log.parameters.changes.sort_by_key(|c| c.timestamp_us);
    log
}
