//! CSV and JSON writers. Numbers carry 17 significant digits.

use junction_core::Mesh;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// `x` in scientific notation with 17 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// A finite number, or an explicit marker string for a non-finite one so
/// that no `NaN` reaches the JSON.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn mesh_json(m: &Mesh) -> Value {
    let (xmin, xmax) = m.x_range();
    let (_, horizon) = m.t_range();
    json!({"xmin": num(xmin), "xmax": num(xmax), "Nx": m.nx(), "T": num(horizon), "Nt": m.nt()})
}

/// Writes a CSV with `header`; each row is already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), String> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    fs::write(path, s).map_err(|e| format!("writing {}: {e}", path.display()))
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| e.to_string())?;
    s.push('\n');
    fs::write(path, s).map_err(|e| format!("writing {}: {e}", path.display()))
}
