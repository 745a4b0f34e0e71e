//! Report values and their JSON and CSV encodings.
//!
//! Reports are `serde_json` trees with sorted keys. Floats are written with
//! 17 significant digits; non-finite floats become the strings `Infinity`,
//! `-Infinity` and `NaN`.

use serde_json::{Map, Number, Value};

use super::config::OutputFormat;

/// Version of the report layout; bump on any incompatible change.
pub const SCHEMA_VERSION: u64 = 1;

pub fn float(x: f64) -> Value {
    if x.is_nan() {
        return Value::String("NaN".into());
    }
    if x.is_infinite() {
        return Value::String(if x > 0.0 { "Infinity" } else { "-Infinity" }.into());
    }
    let text = format!("{x:.16e}");
    Value::Number(
        text.parse::<Number>()
            .expect("formatted float is valid JSON"),
    )
}

pub fn opt_float(x: Option<f64>) -> Value {
    x.map_or(Value::Null, float)
}

/// Builder for a JSON object.
#[derive(Debug, Default, Clone)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn f(self, key: &str, x: f64) -> Self {
        self.put(key, float(x))
    }

    pub fn build(self) -> Value {
        Value::Object(self.0)
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Self {
        o.build()
    }
}

pub fn to_json(report: &Value) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report values serialize");
    text.push('\n');
    text
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// One `key,value` row per leaf, keys as dotted paths.
pub fn to_csv(report: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", report, &mut rows);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(["key", "value"])
        .expect("in-memory write");
    for (k, v) in rows {
        writer.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

pub fn render(report: &Value, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => to_csv(report),
    }
}
