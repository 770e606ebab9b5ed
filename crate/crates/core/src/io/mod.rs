//! File formats: model files (JSON with a canonical writer), CSV datasets,
//! trajectory and acceleration-field text files, and the shipped fixtures.

mod dataset;
mod fixtures;
mod model_file;
mod numeric;

pub use dataset::{load_dataset, parse_dataset, render_dataset, save_dataset};
pub use fixtures::{fixture, fixture_text, FixtureId};
pub use model_file::{load_model, parse_model, render_model, save_model, FORMAT_VERSION};
pub use numeric::{load_field, load_trajectory, parse_field, parse_trajectory};

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::metrics::MetricsError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {source}")]
    Validation { path: String, source: ModelError },
    #[error("{path}: {source}")]
    Metrics { path: String, source: MetricsError },
}

impl IoError {
    /// Content was readable but violates a model, dataset or metric rule.
    pub fn is_validation(&self) -> bool {
        matches!(self, IoError::Validation { .. } | IoError::Metrics { .. })
    }
}

pub(crate) fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

/// Serializes to canonical JSON (see [`canonical_json`]).
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    canonical_json(&serde_json::to_value(value).expect("serializable to JSON"))
}

/// Deterministic JSON: object keys sorted, two-space indentation, arrays of
/// scalars on one line, floats rounded to 12 significant digits and then
/// printed in shortest form. Ends with a newline.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (_, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|v| !v.is_array() && !v.is_object()) => {
            out.push('[');
            for (k, v) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_value(v, indent, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, v) in items.iter().enumerate() {
                push_indent(indent + 1, out);
                write_value(v, indent + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// 12 significant digits, shortest representation, no negative zero.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let magnitude = rounded.abs();
    if (1e-6..1e15).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}
