//! Deterministic JSON output with floats written to 17 significant digits.

use std::fs;
use std::path::Path;

use serde::Serializer;
use serde_json::Value;

use crate::error::Result;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn float_text(v: f64) -> String {
    if v == 0.0 {
        "0.0".into()
    } else {
        format!("{v:.16e}")
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&float_text(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(|i| !matches!(i, Value::Array(_) | Value::Object(_)));
            if flat {
                out.push('[');
                for (k, i) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, i, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, i) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, i, indent + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, val)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, val, indent + 1);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON text with fixed float formatting.
pub fn to_json_text(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, to_json_text(v))?;
    Ok(())
}
