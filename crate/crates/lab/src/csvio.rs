//! CSV output with bit-stable float formatting.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every f64 exactly, so identical runs produce byte-identical
//! files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[Field<'_>]) -> std::io::Result<()> {
        assert_eq!(fields.len(), self.columns, "row width mismatch");
        let mut line = String::new();
        for (i, field) in fields.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            match field {
                Field::Float(v) => line.push_str(&format_float(*v)),
                Field::Int(v) => line.push_str(&v.to_string()),
                Field::Str(s) => line.push_str(s),
                Field::Bool(b) => line.push_str(if *b { "1" } else { "0" }),
            }
        }
        writeln!(self.out, "{line}")
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Field<'a> {
    Float(f64),
    Int(i64),
    Str(&'a str),
    Bool(bool),
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Minimal CSV reader for the files this crate writes (no quoting).
pub fn read_csv(path: &Path) -> std::io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -3.5e-17, 1.0 / 3.0, 85.00316833127216, f64::MIN_POSITIVE] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }
}
