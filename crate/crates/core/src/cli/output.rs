//! CSV and JSON writers. Numbers use the shortest decimal form that parses
//! back to the same `f64`; files are UTF-8 with LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::sampler::Histogram;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV with a header row; every cell is pre-formatted.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut csv = Csv::new(&["bin_lo", "bin_hi", "count"]);
    for i in 0..h.bin_count() {
        let (lo, hi) = h.bin_bounds(i);
        csv.row(&[fmt_f64(lo), fmt_f64(hi), h.counts()[i].to_string()]);
    }
    csv.into_string()
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, -2.0, 1e-20, 123456789.125, 5e300, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn histogram_csv_layout() {
        let mut h = Histogram::uniform(0.0, 1.0, 2).unwrap();
        h.add(0.7);
        assert_eq!(histogram_csv(&h), "bin_lo,bin_hi,count\n0.0,0.5,0\n0.5,1.0,1\n");
    }
}
