use serde::Serialize;
use serde_json::{Map, Number, Value};
use serde_value::Value as Raw;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize)]
pub struct OutputTargets {
    pub json: Option<String>,
    pub csv: Option<String>,
    pub stdout: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    /// Where the seed came from: `flag`, `env` or `default`.
    pub seed_source: String,
    pub work_limit: u64,
    pub threads: Option<usize>,
    pub output: OutputTargets,
}

#[derive(Clone, Debug, Serialize)]
pub struct Warning {
    pub kind: String,
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub results: Value,
    pub timing: f64,
    pub warnings: Vec<Warning>,
}

/// Converts `results` to JSON, replacing every non-finite float with `null`
/// and recording where it was.
pub fn to_finite_json<T: Serialize>(results: &T, warnings: &mut Vec<Warning>) -> Value {
    let raw = serde_value::to_value(results).expect("results serialise");
    convert(raw, "results", warnings)
}

fn convert(raw: Raw, path: &str, warnings: &mut Vec<Warning>) -> Value {
    let float = |x: f64, warnings: &mut Vec<Warning>| match Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => {
            warnings.push(Warning {
                kind: "non_finite".into(),
                path: path.to_string(),
                message: format!("value {x} replaced by null"),
            });
            Value::Null
        }
    };
    match raw {
        Raw::Bool(b) => Value::Bool(b),
        Raw::U8(x) => x.into(),
        Raw::U16(x) => x.into(),
        Raw::U32(x) => x.into(),
        Raw::U64(x) => x.into(),
        Raw::I8(x) => x.into(),
        Raw::I16(x) => x.into(),
        Raw::I32(x) => x.into(),
        Raw::I64(x) => x.into(),
        Raw::F32(x) => float(x as f64, warnings),
        Raw::F64(x) => float(x, warnings),
        Raw::Char(c) => Value::String(c.to_string()),
        Raw::String(s) => Value::String(s),
        Raw::Unit => Value::Null,
        Raw::Option(None) => Value::Null,
        Raw::Option(Some(v)) | Raw::Newtype(v) => convert(*v, path, warnings),
        Raw::Seq(items) => Value::Array(
            items
                .into_iter()
                .enumerate()
                .map(|(i, v)| convert(v, &format!("{path}[{i}]"), warnings))
                .collect(),
        ),
        Raw::Map(entries) => {
            let mut out = Map::new();
            for (k, v) in entries {
                let key = match k {
                    Raw::String(s) => s,
                    other => convert(other, path, warnings).to_string(),
                };
                let child = convert(v, &format!("{path}.{key}"), warnings);
                out.insert(key, child);
            }
            Value::Object(out)
        }
        Raw::Bytes(b) => Value::Array(b.into_iter().map(Value::from).collect()),
    }
}

/// Plain-text rendering: one line per top-level field, long arrays summarised.
pub fn render_text(report: &Report) -> String {
    let mut out = format!("arw {} {}\n", report.version, report.config.command);
    render_value(&report.results, "", &mut out);
    out.push_str(&format!("seed {} ({})\n", report.config.seed, report.config.seed_source));
    out.push_str(&format!("time {:.3} s\n", report.timing));
    for w in &report.warnings {
        out.push_str(&format!("warning [{}] {}: {}\n", w.kind, w.path, w.message));
    }
    out
}

fn render_value(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match child {
                    Value::Object(_) => render_value(child, &name, out),
                    Value::Array(items) if items.len() > 40 || items.iter().any(|x| x.is_object()) => {
                        out.push_str(&format!("{name}: [{} items]\n", items.len()));
                    }
                    _ => out.push_str(&format!("{name}: {child}\n")),
                }
            }
        }
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}
