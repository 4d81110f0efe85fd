//! File formats.
//!
//! Signals are stored either as text (`dt=<value>` on the first line, then
//! one acceleration per line) or as raw little-endian `f64`s with `dt`
//! first. All tabular outputs are comma-separated with a header row.
//! Floats are written in Rust's shortest round-trip form, so reading back a
//! file reproduces the values bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ground_motion::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Csv,
    Binary,
}

impl SignalFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SignalFormat::Csv => "csv",
            SignalFormat::Binary => "bin",
        }
    }
}

pub fn write_signal(path: &Path, signal: &Signal, format: SignalFormat) -> Result<()> {
    match format {
        SignalFormat::Csv => write_signal_csv(path, signal),
        SignalFormat::Binary => write_signal_bin(path, signal),
    }
}

/// Reads either format, chosen by file extension (`.bin` is binary).
pub fn read_signal(path: &Path) -> Result<Signal> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_signal_bin(path),
        _ => read_signal_csv(path),
    }
}

pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "dt={}", signal.dt())?;
    for v in signal.samples() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))??;
    let dt: f64 = header
        .trim()
        .strip_prefix("dt=")
        .ok_or_else(|| Error::format(path, "first line must be `dt=<value>`"))?
        .trim()
        .parse()
        .map_err(|e| Error::format(path, format!("bad dt: {e}")))?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        samples.push(
            t.parse::<f64>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 2)))?,
        );
    }
    Signal::new(dt, samples).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_signal_bin(path: &Path, signal: &Signal) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * (signal.len() + 1));
    bytes.extend_from_slice(&signal.dt().to_le_bytes());
    for v in signal.samples() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_signal_bin(path: &Path) -> Result<Signal> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || bytes.len() % 8 != 0 {
        return Err(Error::format(path, "length is not a positive multiple of 8 bytes"));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let dt = values.next().expect("checked length");
    Signal::new(dt, values.collect()).map_err(|e| Error::format(path, e.to_string()))
}

/// A header plus rows of text cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(j)
                    .ok_or_else(|| Error::invalid(format!("row {i} too short")))?
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("row {i}, column `{name}`: {e}")))
            })
            .collect()
    }

    pub fn column_usize(&self, name: &str) -> Result<Vec<usize>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(j)
                    .ok_or_else(|| Error::invalid(format!("row {i} too short")))?
                    .parse::<usize>()
                    .map_err(|e| Error::invalid(format!("row {i}, column `{name}`: {e}")))
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::invalid("missing header"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::invalid(format!(
                    "row {} has {} cells, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Flat `key=value` report file, written in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatReport {
    pub entries: Vec<(String, String)>,
}

impl FlatReport {
    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for (k, v) in &self.entries {
            writeln!(w, "{k}={v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = FlatReport::default();
        for (i, line) in text.lines().enumerate() {
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key=value", i + 1)))?;
            report.insert(k.trim(), v.trim());
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}
