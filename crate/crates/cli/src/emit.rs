//! Deterministic TOML writer.
//!
//! Floats are printed as `{:.16e}` (17 significant digits, round-trip
//! exact); tables come out in key order with scalars before sub-tables.

use std::fmt::Write;

use toml::{Table, Value};

pub const FORMAT_VERSION: i64 = 1;

pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn key(k: &str) -> String {
    if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        Value::String(k.to_string()).to_string()
    }
}

fn dotted(path: &[String]) -> String {
    path.iter().map(|k| key(k)).collect::<Vec<_>>().join(".")
}

pub fn inline(v: &Value) -> String {
    match v {
        Value::String(_) | Value::Datetime(_) => v.to_string(),
        Value::Integer(i) => i.to_string(),
        Value::Float(x) => float(*x),
        Value::Boolean(b) => b.to_string(),
        Value::Array(a) => format!("[{}]", a.iter().map(inline).collect::<Vec<_>>().join(", ")),
        Value::Table(t) => {
            if t.is_empty() {
                "{}".into()
            } else {
                let body: Vec<String> = t.iter().map(|(k, v)| format!("{} = {}", key(k), inline(v))).collect();
                format!("{{ {} }}", body.join(", "))
            }
        }
    }
}

fn is_table_array(v: &Value) -> bool {
    matches!(v, Value::Array(a) if !a.is_empty() && a.iter().all(Value::is_table))
}

fn table(out: &mut String, path: &mut Vec<String>, t: &Table) {
    for (k, v) in t {
        if !v.is_table() && !is_table_array(v) {
            let _ = writeln!(out, "{} = {}", key(k), inline(v));
        }
    }
    for (k, v) in t {
        if let Value::Table(sub) = v {
            path.push(k.clone());
            let _ = writeln!(out, "\n[{}]", dotted(path));
            table(out, path, sub);
            path.pop();
        }
    }
    for (k, v) in t {
        if let (true, Value::Array(items)) = (is_table_array(v), v) {
            path.push(k.clone());
            for item in items {
                let _ = writeln!(out, "\n[[{}]]", dotted(path));
                if let Value::Table(sub) = item {
                    table(out, path, sub);
                }
            }
            path.pop();
        }
    }
}

/// A full document: the format header, then `body`.
pub fn document(format: &str, body: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format = {}", Value::String(format.to_string()));
    let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
    table(&mut out, &mut Vec::new(), body);
    out
}

/// Reads a document and checks its header.
pub fn read_document(text: &str, format: &str) -> Result<Table, String> {
    let t: Table = text.parse::<Table>().map_err(|e| e.to_string())?;
    match (t.get("format").and_then(Value::as_str), t.get("format_version").and_then(Value::as_integer)) {
        (Some(f), Some(FORMAT_VERSION)) if f == format => Ok(t),
        (Some(f), Some(v)) => Err(format!("expected {format} version {FORMAT_VERSION}, found {f} version {v}")),
        _ => Err("missing format header".into()),
    }
}

/// Serializes any value to a table; `None` fields are dropped.
pub fn to_table<T: serde::Serialize>(v: &T) -> Table {
    match Value::try_from(v) {
        Ok(Value::Table(t)) => t,
        Ok(other) => {
            let mut t = Table::new();
            t.insert("value".into(), other);
            t
        }
        Err(e) => panic!("value is not representable in TOML: {e}"),
    }
}

pub fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

pub fn ints(v: &[i64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Integer(*x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1 + 0.2, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, -0.0, f64::MAX, f64::MIN_POSITIVE, 5e-324] {
            let s = float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn nested_document_parses() {
        let mut inner = Table::new();
        inner.insert("x".into(), Value::Float(1.5));
        inner.insert("weird key".into(), Value::Integer(3));
        let mut rec = Table::new();
        rec.insert("k".into(), ints(&[1, -1]));
        rec.insert("inner".into(), Value::Table(inner.clone()));
        let mut body = Table::new();
        body.insert("b".into(), Value::Boolean(true));
        body.insert("z".into(), Value::Table(inner));
        body.insert("records".into(), Value::Array(vec![Value::Table(rec.clone()), Value::Table(rec)]));
        body.insert("mixed".into(), Value::Array(vec![Value::String("a".into()), floats(&[f64::INFINITY, 2.0])]));
        let text = document("test", &body);
        let back = read_document(&text, "test").unwrap();
        assert_eq!(back.get("records").unwrap().as_array().unwrap().len(), 2);
        assert_eq!(back["z"]["weird key"].as_integer(), Some(3));
        assert_eq!(back["mixed"][1][0].as_float(), Some(f64::INFINITY));
        assert!(read_document(&text, "other").is_err());
        assert!(read_document("x = 1", "test").is_err());
    }
}
