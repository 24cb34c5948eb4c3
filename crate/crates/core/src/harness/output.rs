use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::SCHEMA_VERSION;
use crate::error::{Error, Result};

/// Provenance line written before the column names of every CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvHeader {
    pub config_hash: String,
    pub seed: u64,
}

impl CsvHeader {
    pub fn line(&self) -> String {
        format!("# schema={SCHEMA_VERSION} config={} seed={}", self.config_hash, self.seed)
    }

    pub fn parse(line: &str) -> Option<Self> {
        let mut hash = None;
        let mut seed = None;
        let mut schema = None;
        for kv in line.strip_prefix("# ")?.split_whitespace() {
            match kv.split_once('=')? {
                ("schema", v) => schema = v.parse::<u32>().ok(),
                ("config", v) => hash = Some(v.to_string()),
                ("seed", v) => seed = v.parse().ok(),
                _ => {}
            }
        }
        (schema? == SCHEMA_VERSION).then_some(CsvHeader { config_hash: hash?, seed: seed? })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `rows` under the provenance line and the given column names.
pub fn write_csv<R: Serialize>(path: &Path, header: &CsvHeader, columns: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.line())?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_csv`]: its provenance and rows.
pub fn read_csv(path: &Path) -> Result<(CsvHeader, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let header = CsvHeader::parse(first).ok_or_else(|| Error::config(format!("{} has no provenance line", path.display())))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    Ok((header, columns, rows))
}
