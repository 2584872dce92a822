//! CSV tables and verdict files.
//!
//! Every CSV has a header row and ends with `# seed=` and `# version=`
//! comment lines. Floats are written in shortest round-trip form, so equal
//! values always produce equal bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self, seed: u64) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let mut out = w.into_inner().expect("in-memory flush");
        out.extend_from_slice(format!("# seed={seed}\n# version={VERSION}\n").as_bytes());
        out
    }
}

/// Outcome of one statistical or exact check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
}

impl Verdict {
    /// Passes when `statistic <= threshold`.
    pub fn at_most(test: impl Into<String>, statistic: f64, threshold: f64, seed: u64) -> Self {
        Self { test: test.into(), statistic, threshold, pass: statistic <= threshold, seed }
    }

    /// Passes when `statistic >= threshold`.
    pub fn at_least(test: impl Into<String>, statistic: f64, threshold: f64, seed: u64) -> Self {
        Self { test: test.into(), statistic, threshold, pass: statistic >= threshold, seed }
    }
}

/// Tables and verdicts produced by one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn merge(&mut self, other: Outcome) {
        self.tables.extend(other.tables);
        self.verdicts.extend(other.verdicts);
    }

    pub fn verdicts_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(&self.verdicts).expect("verdicts serialize");
        v.push(b'\n');
        v
    }

    /// Every output file as `(file name, bytes)`.
    pub fn files(&self, seed: u64) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<(String, Vec<u8>)> = self.tables.iter().map(|t| (format!("{}.csv", t.name), t.to_csv(seed))).collect();
        if !self.verdicts.is_empty() {
            out.push(("verdicts.json".into(), self.verdicts_json()));
        }
        out
    }

    pub fn write(&self, dir: &Path, seed: u64) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.files(seed)
            .into_iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                fs::write(&p, bytes)?;
                Ok(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_metadata() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(["[[1,2],[3]]", "0.1"]);
        let s = String::from_utf8(t.to_csv(9)).unwrap();
        assert_eq!(s, format!("a,b\n\"[[1,2],[3]]\",0.1\n# seed=9\n# version={VERSION}\n"));
    }

    #[test]
    fn verdict_directions() {
        assert!(Verdict::at_most("t", 1.0, 1.0, 0).pass);
        assert!(!Verdict::at_least("t", 0.5, 1.0, 0).pass);
    }
}
