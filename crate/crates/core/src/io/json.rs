//! Deterministic JSON rendering.
//!
//! Reals are written in `%.17g` style (17 significant digits, trailing zeros
//! dropped) so every `f64` round-trips, and output is byte-stable across
//! platforms.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyOrder {
    /// Keep the insertion (declaration) order.
    AsIs,
    /// Sort object keys lexicographically at every level.
    Sorted,
}

/// Formats a finite real with 17 significant digits, C `%.17g` style.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };

    if !(-4..17).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        trim_fraction(&mut m);
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }

    let mut s = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let point = exp as usize + 1;
        format!("{}.{}", &digits[..point], &digits[point..])
    };
    trim_fraction(&mut s);
    format!("{sign}{s}")
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}

fn write_break(out: &mut String, depth: Option<usize>) {
    if let Some(depth) = depth {
        out.push('\n');
        for _ in 0..depth {
            out.push_str("  ");
        }
    }
}

/// `depth` is `None` for single-line output.
fn write_value(value: &Value, order: KeyOrder, depth: Option<usize>, out: &mut String) {
    let inner = depth.map(|d| d + 1);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !(n.is_i64() || n.is_u64()) => {
                if f.is_finite() {
                    out.push_str(&format_real(f))
                } else {
                    out.push_str("null")
                }
            }
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&quote(s)),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_break(out, inner);
                write_value(item, order, inner, out);
            }
            write_break(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            if order == KeyOrder::Sorted {
                entries.sort_by(|a, b| a.0.cmp(b.0));
            }
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_break(out, inner);
                out.push_str(&quote(k));
                out.push_str(if depth.is_some() { ": " } else { ":" });
                write_value(v, order, inner, out);
            }
            write_break(out, depth);
            out.push('}');
        }
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// Pretty-prints `value` with two-space indentation and a trailing newline.
pub fn render(value: &Value, order: KeyOrder) -> String {
    let mut out = String::new();
    write_value(value, order, Some(0), &mut out);
    out.push('\n');
    out
}

/// Single-line rendering without a newline, used for JSON Lines.
pub fn render_line(value: &Value, order: KeyOrder) -> String {
    let mut out = String::new();
    write_value(value, order, None, &mut out);
    out
}

pub fn to_value<T: Serialize>(item: &T) -> Result<Value> {
    serde_json::to_value(item).map_err(|e| Error::format("json", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(-2.25), "-2.25");
        assert_eq!(format_real(std::f64::consts::FRAC_PI_4), "0.78539816339744828");
        assert_eq!(format_real(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_real(1e20), "1e+20");
        assert_eq!(format_real(123456.0), "123456");
        assert_eq!(format_real(0.0001), "0.0001");
    }

    #[test]
    fn reals_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23, -7.5e-9] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn sorted_render() {
        let v = json!({"b": 1, "a": [0.5, true, null], "c": {"z": "q\"", "y": {}}});
        assert_eq!(
            render_line(&v, KeyOrder::Sorted),
            r#"{"a":[0.5,true,null],"b":1,"c":{"y":{},"z":"q\""}}"#
        );
        assert_eq!(
            render_line(&v, KeyOrder::AsIs),
            r#"{"b":1,"a":[0.5,true,null],"c":{"z":"q\"","y":{}}}"#
        );
        assert!(render(&v, KeyOrder::Sorted).starts_with("{\n  \"a\": [\n    0.5,"));
    }

    #[test]
    fn strings_keep_inner_whitespace() {
        let v = json!({"k": "a: \n  b"});
        assert_eq!(render_line(&v, KeyOrder::AsIs), r#"{"k":"a: \n  b"}"#);
    }
}
