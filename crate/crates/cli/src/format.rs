//! Numbers are emitted with 9 significant digits.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{CliError, Result};

pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Text form of [`round9`], plain decimal for moderate magnitudes.
pub fn num9(x: f64) -> String {
    let r = round9(x);
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e9).contains(&a) || !r.is_finite() {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Rounds every float inside `v`; integers are left alone.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round9(n.as_f64().unwrap_or(f64::NAN));
            Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Value {
    round_json(serde_json::to_value(value).expect("plain data serializes"))
}

/// Object from `(field, value)` pairs, rounded.
pub fn object(fields: Vec<(&str, Value)>) -> Value {
    let map: Map<String, Value> = fields.into_iter().map(|(k, v)| (k.to_string(), round_json(v))).collect();
    Value::Object(map)
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.into(), source })
}

/// CSV with a header row and numbers from [`num9`].
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|&x| num9(x))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
