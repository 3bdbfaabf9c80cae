//! Self-describing output records and their three encodings.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// One invocation's certificate. Serialized field order is fixed, so
/// parse followed by [`to_json`] reproduces the same bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub command: Vec<String>,
    pub tool_version: String,
    pub precision: String,
    pub elapsed_seconds: f64,
    pub inputs: Map<String, Value>,
    pub outputs: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<Vec<Value>>,
}

impl ReportRecord {
    pub fn new(command: Vec<String>, precision: &str) -> Self {
        ReportRecord {
            command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            precision: precision.to_string(),
            elapsed_seconds: 0.0,
            inputs: Map::new(),
            outputs: Map::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.inputs.insert(key.to_string(), value.into());
    }

    pub fn output(&mut self, key: &str, value: impl Into<Value>) {
        self.outputs.insert(key.to_string(), value.into());
    }

    pub fn table(&mut self, columns: &[&str]) {
        self.columns = columns.iter().map(|c| c.to_string()).collect();
    }

    pub fn row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// JSON number for a finite `x`, `null` otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// 17 significant digits: enough to recover every `f64` exactly.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with every float written by [`full`].
struct FullPrecision(PrettyFormatter<'static>);

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(full(value).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json(record: &ReportRecord) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    record.serialize(&mut ser).expect("records serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => full(n.as_f64().expect("f64")),
        other => other.to_string(),
    }
}

/// RFC 4180 CSV of the table, or of a single `inputs ∪ outputs` row when the
/// record has no table.
pub fn to_csv(record: &ReportRecord) -> String {
    let (header, rows): (Vec<String>, Vec<Vec<String>>) = if record.columns.is_empty() {
        let pairs: Vec<_> = record.inputs.iter().chain(record.outputs.iter()).filter(|(_, v)| !v.is_array()).collect();
        (pairs.iter().map(|(k, _)| k.to_string()).collect(), vec![pairs.iter().map(|(_, v)| cell(v)).collect()])
    } else {
        (record.columns.clone(), record.rows.iter().map(|r| r.iter().map(cell).collect()).collect())
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

fn short(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() && x != 0.0 && !(1e-4..1e6).contains(&x.abs()) => format!("{x:e}"),
            Some(x) if n.is_f64() => format!("{x}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

pub fn to_text(record: &ReportRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}  (zerogap {}, {})\n", record.command.join(" "), record.tool_version, record.precision));
    let width = record.inputs.keys().chain(record.outputs.keys()).map(|k| k.len()).max().unwrap_or(0);
    for (k, v) in &record.inputs {
        out.push_str(&format!("  {k:<width$} = {}\n", short(v)));
    }
    for (k, v) in &record.outputs {
        if let Value::Array(items) = v {
            out.push_str(&format!("  {k}:\n"));
            for item in items {
                out.push_str(&format!("    {}\n", short(item)));
            }
        } else {
            out.push_str(&format!("  {k:<width$} : {}\n", short(v)));
        }
    }
    if !record.columns.is_empty() {
        let cells: Vec<Vec<String>> = record.rows.iter().map(|r| r.iter().map(short).collect()).collect();
        let widths: Vec<usize> = (0..record.columns.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([record.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |r: &[String]| {
            let padded: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            format!("  {}\n", padded.join("  "))
        };
        out.push_str(&line(&record.columns));
        for r in &cells {
            out.push_str(&line(r));
        }
    }
    out.push_str(&format!("  elapsed {:.3} s\n", record.elapsed_seconds));
    out
}

pub fn render(record: &ReportRecord, format: Format) -> String {
    match format {
        Format::Text => to_text(record),
        Format::Json => to_json(record),
        Format::Csv => to_csv(record),
    }
}
