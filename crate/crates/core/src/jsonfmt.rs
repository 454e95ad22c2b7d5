//! JSON emitter that writes floats with 17 significant digits so every f64
//! survives a text round trip bit-for-bit. serde_json handles parsing; this
//! controls only the output side.

use serde_json::Value;

/// 17 significant digits, enough to reconstruct any finite f64 exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize with deterministic key order (serde_json maps preserve insertion
/// order) and exact float formatting.
pub fn to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Pretty variant with two-space indentation for files meant to be diffed.
pub fn to_string_pretty(value: &Value) -> String {
    let mut out = String::new();
    write_value_indented(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_value(v, out);
            }
            out.push('}');
        }
    }
}

fn write_value_indented(value: &Value, depth: usize, out: &mut String) {
    match value {
        Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(depth + 1, out);
                write_value_indented(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                indent(depth + 1, out);
                write_string(k, out);
                out.push_str(": ");
                write_value_indented(v, depth + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
            out.push('}');
        }
        other => write_value(other, out),
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_number(n: &serde_json::Number, out: &mut String) {
    if n.is_i64() || n.is_u64() {
        out.push_str(&n.to_string());
    } else {
        out.push_str(&format_f64(n.as_f64().unwrap_or(0.0)));
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789_012_345_6, f64::MIN_POSITIVE] {
            let text = format_f64(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn document_round_trips_through_serde() {
        let doc = json!({
            "name": "x\ny\"z\"",
            "ints": [1, 2, 3],
            "floats": [0.1, 2.5e-7],
            "nested": {"flag": true, "nothing": null}
        });
        let text = to_string(&doc);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["name"], doc["name"]);
        assert_eq!(back["ints"], doc["ints"]);
        assert_eq!(back["floats"][0].as_f64(), doc["floats"][0].as_f64());
        let pretty = to_string_pretty(&doc);
        let back: Value = serde_json::from_str(&pretty).unwrap();
        assert_eq!(back["nested"], doc["nested"]);
    }
}
