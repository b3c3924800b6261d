//! CSV tables with a schema-version line and `# key=value` metadata lines.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_LINE: &str = "# schema_version=1";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Parsed table: metadata from comment lines, header and string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(j)
                    .ok_or_else(|| Error::Parse(format!("row {i} is short")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {i}, column `{name}`: {e}")))
            })
            .collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.meta(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Parse(format!("metadata `{key}={v}`: {e}")))
            })
            .transpose()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCHEMA_LINE}")?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}={v}")?;
        }
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            cw.write_record(r).map_err(csv_err)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(fs::File::create(path)?))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let metadata = parse_metadata(text);
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(csv_err))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Table { metadata, header, rows })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// `# key=value` comment lines; the schema line is included as `schema_version`.
pub fn parse_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Writes serde records after the schema line; an empty slice still gets a header
/// when `header` is given.
pub fn write_records<T: Serialize, W: Write>(mut w: W, records: &[T], header: &[&str]) -> Result<()> {
    writeln!(w, "{SCHEMA_LINE}")?;
    let mut cw = csv::WriterBuilder::new()
        .has_headers(!records.is_empty())
        .from_writer(w);
    if records.is_empty() {
        cw.write_record(header).map_err(csv_err)?;
    }
    for r in records {
        cw.serialize(r).map_err(csv_err)?;
    }
    cw.flush()?;
    Ok(())
}

/// Two-column `t,<name>` series.
pub fn series_table(name: &str, values: &[f64]) -> Table {
    let mut t = Table::new(&["t", name]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*v)]);
    }
    t
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
