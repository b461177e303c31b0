//! Self-describing experiment reports.
//!
//! CSV layout:
//!
//! ```text
//! # experiment=<id>
//! # version=<crate version>
//! # timestamp=<unix seconds>          (only when SOURCE_DATE_EPOCH is set)
//! # config.<key>=<JSON value>         (one line per key, sorted)
//! # summary.<key>=<JSON value>        (one line per key, sorted)
//! <column>,<column>,...
//! <cell>,<cell>,...
//! ```
//!
//! Cells are numbers, strings or empty (null). JSON reports carry the same
//! fields as one object: `experiment`, `config`, `columns`, `rows`,
//! `summary`, `environment {version, timestamp}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    /// Unix time from `SOURCE_DATE_EPOCH`; absent otherwise so that reruns
    /// stay byte-identical.
    pub timestamp: Option<u64>,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
    pub environment: Environment,
}

impl Report {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: Map::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Map::new(),
            environment: Environment::current(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.config.insert(key.to_string(), serde_json::to_value(value).expect("serializable config"));
        self
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("serializable summary"));
        self
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the columns");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric cells of a column; non-numeric cells become NaN.
    pub fn f64_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Structural checks: unique non-empty column names, rectangular rows,
    /// scalar cells, non-empty experiment id.
    pub fn validate(&self) -> Result<(), String> {
        if self.experiment.is_empty() {
            return Err("empty experiment id".into());
        }
        for (j, c) in self.columns.iter().enumerate() {
            if c.is_empty() || self.columns[..j].contains(c) {
                return Err(format!("bad or duplicate column name `{c}`"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(format!("row {i} has {} cells, expected {}", row.len(), self.columns.len()));
            }
            if let Some(cell) = row.iter().find(|v| v.is_array() || v.is_object()) {
                return Err(format!("row {i} has a non-scalar cell {cell}"));
            }
        }
        Ok(())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# experiment={}\n# version={}\n", self.experiment, self.environment.version);
        if let Some(t) = self.environment.timestamp {
            out.push_str(&format!("# timestamp={t}\n"));
        }
        for (prefix, map) in [("config", &self.config), ("summary", &self.summary)] {
            for (k, v) in map {
                out.push_str(&format!("# {prefix}.{k}={v}\n"));
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text)).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory write")).expect("utf-8"));
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let report: Report = serde_json::from_str(text).map_err(|e| ParseError::line(e.line(), e.to_string()))?;
        report.validate().map_err(|m| ParseError::line(1, m))?;
        Ok(report)
    }

    pub fn from_csv(text: &str) -> Result<Self, ParseError> {
        let mut report = Report::new("", &[]);
        report.environment.timestamp = None;
        let mut header_lines = 0;
        for (i, line) in text.lines().enumerate() {
            let Some(body) = line.strip_prefix("# ") else { break };
            header_lines = i + 1;
            let (key, value) =
                body.split_once('=').ok_or_else(|| ParseError::line(i + 1, "header line lacks `key=value`"))?;
            let json = || serde_json::from_str::<Value>(value).map_err(|e| ParseError::line(i + 1, e.to_string()));
            match key {
                "experiment" => report.experiment = value.to_string(),
                "version" => report.environment.version = value.to_string(),
                "timestamp" => {
                    report.environment.timestamp =
                        Some(value.parse().map_err(|_| ParseError::line(i + 1, "bad timestamp"))?)
                }
                _ => {
                    if let Some(k) = key.strip_prefix("config.") {
                        report.config.insert(k.to_string(), json()?);
                    } else if let Some(k) = key.strip_prefix("summary.") {
                        report.summary.insert(k.to_string(), json()?);
                    } else {
                        return Err(ParseError::line(i + 1, format!("unknown header key `{key}`")));
                    }
                }
            }
        }
        let body: String = text.lines().skip(header_lines).map(|l| format!("{l}\n")).collect();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns = reader.headers().map_err(|e| ParseError::line(header_lines + 1, e.to_string()))?;
        report.columns = columns.iter().map(str::to_string).collect();
        for (i, record) in reader.records().enumerate() {
            let line = header_lines + i + 2;
            let record = record.map_err(|e| ParseError::line(line, e.to_string()))?;
            report.rows.push(record.iter().map(parse_cell).collect());
        }
        report.validate().map_err(|m| ParseError::line(header_lines + 1, m))?;
        Ok(report)
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_cell(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Ok(v) = serde_json::from_str::<Value>(s) {
        if v.is_number() || v.is_boolean() {
            return v;
        }
    }
    Value::String(s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Report {
        let mut r = Report::new("demo", &["method", "L", "value"]);
        r.config("L", [10, 100]).config("scheme", "RCQSW").summary("C", 0.5);
        r.push_row(vec![json!("SW"), json!(10), json!(0.125)]);
        r.push_row(vec![json!("a,b"), json!(100), Value::Null]);
        r.environment.timestamp = None;
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let expected = format!(
            "# experiment=demo\n# version={}\n# config.L=[10,100]\n# config.scheme=\"RCQSW\"\n# summary.C=0.5\n\
             method,L,value\nSW,10,0.125\n\"a,b\",100,\n",
            env!("CARGO_PKG_VERSION")
        );
        assert_eq!(csv, expected);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let r = sample();
        assert_eq!(Report::from_csv(&r.to_csv()).unwrap(), r);
        assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);
        let mut stamped = r.clone();
        stamped.environment.timestamp = Some(1_700_000_000);
        assert_eq!(Report::from_csv(&stamped.to_csv()).unwrap(), stamped);
    }

    #[test]
    fn validation_rejects_ragged_rows() {
        let mut r = sample();
        r.rows[0].pop();
        assert!(r.validate().is_err());
        assert!(Report::from_csv("# experiment=x\na,b\n1,2,3\n").is_err());
        assert!(Report::from_csv("# bogus\na\n1\n").is_err());
        assert!(Report::from_json("{}").is_err());
    }

    #[test]
    fn columns_are_addressable() {
        let r = sample();
        assert_eq!(r.f64_column("L").unwrap(), vec![10.0, 100.0]);
        assert!(r.f64_column("value").unwrap()[1].is_nan());
        assert!(r.column("nope").is_none());
    }
}
