//! Tabular output shared by sweeps and figures, with CSV and JSON readers so
//! every emitted file can be parsed back to the same values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// One cell. Reals are written with 17 significant digits in CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(u64),
    Real(f64),
    Missing,
}

impl Value {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Real(x) => Some(x),
            Value::Missing => None,
        }
    }

    fn to_csv(self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format!("{x:.16e}"),
            Value::Missing => String::new(),
        }
    }

    fn from_csv(cell: &str) -> Option<Value> {
        if cell.is_empty() {
            Some(Value::Missing)
        } else if cell.bytes().all(|b| b.is_ascii_digit()) {
            cell.parse().ok().map(Value::Int)
        } else {
            cell.parse().ok().map(Value::Real)
        }
    }

    fn to_json(self) -> serde_json::Value {
        match self {
            Value::Int(i) => serde_json::Value::from(i),
            Value::Real(x) => Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Value::Missing => serde_json::Value::Null,
        }
    }

    fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Null => Some(Value::Missing),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(Value::Int)
                .or_else(|| n.as_f64().map(Value::Real)),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as u64)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, `None` for missing cells.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.column(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64()).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        let fail = |e: csv::Error| CliError::Output(e.to_string());
        out.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_csv())).map_err(fail)?;
        }
        out.flush().map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, String> {
        let mut input = csv::Reader::from_reader(r);
        let columns: Vec<String> = input
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let row = record
                .iter()
                .map(|cell| Value::from_csv(cell).ok_or_else(|| format!("row {}: bad number {cell:?}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(format!("row {} has {} cells, header has {}", i + 1, row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    /// `{"spec": <spec>, "rows": [{column: value, ...}, ...]}`.
    pub fn to_json(&self, spec: &serde_json::Value) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let record: Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.to_json()))
                    .collect();
                serde_json::Value::Object(record)
            })
            .collect();
        serde_json::json!({ "spec": spec, "rows": serde_json::Value::Array(rows) })
    }

    pub fn write_json<W: Write>(&self, spec: &serde_json::Value, w: W) -> CliResult<()> {
        let mut w = w;
        serde_json::to_writer_pretty(&mut w, &self.to_json(spec))
            .map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(w).map_err(|e| CliError::Output(e.to_string()))
    }

    /// Parse a JSON document written by [`Dataset::write_json`]; returns the
    /// echoed spec alongside the rows.
    pub fn read_json<R: Read>(r: R) -> Result<(serde_json::Value, Self), String> {
        let doc: serde_json::Value = serde_json::from_reader(r).map_err(|e| e.to_string())?;
        let spec = doc.get("spec").cloned().ok_or("missing \"spec\"")?;
        let records = doc
            .get("rows")
            .and_then(|r| r.as_array())
            .ok_or("missing \"rows\" array")?;
        let columns: Vec<String> = match records.first() {
            Some(serde_json::Value::Object(first)) => first.keys().cloned().collect(),
            Some(_) => return Err("rows must be objects".into()),
            None => Vec::new(),
        };
        let mut rows = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let obj = rec.as_object().ok_or_else(|| format!("row {i} is not an object"))?;
            if obj.len() != columns.len() {
                return Err(format!("row {i} has {} fields, expected {}", obj.len(), columns.len()));
            }
            let row = columns
                .iter()
                .map(|c| {
                    obj.get(c)
                        .and_then(Value::from_json)
                        .ok_or_else(|| format!("row {i}: bad or missing {c:?}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok((spec, Self { columns, rows }))
    }
}
