//! Append-only structured results: one record per line, fixed field order.
//!
//! `config_hash | statistic | params | value | se | replicas | wall_ms`
//!
//! Everything except the trailing wall-time column is a deterministic
//! function of `(config, seed)`; readers that compare runs strip the last
//! column.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub statistic: String,
    /// `key=value` pairs, semicolon-separated, already sorted.
    pub params: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub replicas: usize,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{}|{}|{}|{:.17e}|{}|{}|{}",
            self.config_hash,
            self.statistic,
            self.params,
            self.value,
            match self.std_error {
                Some(e) => format!("{e:.17e}"),
                None => "-".to_string(),
            },
            self.replicas,
            self.wall_ms
        );
        s
    }

    /// The line with the wall-time column stripped (the deterministic part).
    pub fn deterministic_part(line: &str) -> &str {
        match line.rfind('|') {
            Some(i) => &line[..i],
            None => line,
        }
    }

    pub fn parse(line: &str) -> Result<RunRecord> {
        let parts: Vec<&str> = line.split('|').collect();
        if parts.len() != 7 {
            return Err(Error::Config(format!(
                "record has {} fields, expected 7: '{line}'",
                parts.len()
            )));
        }
        Ok(RunRecord {
            config_hash: parts[0].to_string(),
            statistic: parts[1].to_string(),
            params: parts[2].to_string(),
            value: parts[3]
                .parse()
                .map_err(|_| Error::Config(format!("bad value in '{line}'")))?,
            std_error: if parts[4] == "-" {
                None
            } else {
                Some(
                    parts[4]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad se in '{line}'")))?,
                )
            },
            replicas: parts[5]
                .parse()
                .map_err(|_| Error::Config(format!("bad replica count in '{line}'")))?,
            wall_ms: parts[6]
                .parse()
                .map_err(|_| Error::Config(format!("bad wall time in '{line}'")))?,
        })
    }
}

/// Collects records for one run and flushes them to `<out>/results.txt`
/// through a single writer.
#[derive(Debug)]
pub struct Recorder {
    config_hash: String,
    records: Vec<RunRecord>,
    started: Instant,
}

impl Recorder {
    pub fn new(config_hash: String) -> Self {
        Recorder {
            config_hash,
            records: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn emit(
        &mut self,
        statistic: impl Into<String>,
        params: impl Into<String>,
        value: f64,
        std_error: Option<f64>,
        replicas: usize,
    ) {
        self.records.push(RunRecord {
            config_hash: self.config_hash.clone(),
            statistic: statistic.into(),
            params: params.into(),
            value,
            std_error,
            replicas,
            wall_ms: self.started.elapsed().as_millis() as u64,
        });
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    /// Append all records to `dir/results.txt`, creating the directory, and
    /// drop the config text alongside as `<hash>.cfg` for exact replay.
    pub fn flush(&self, dir: &Path, config_text: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("results.txt");
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)?;
        for r in &self.records {
            writeln!(file, "{}", r.to_line())?;
        }
        std::fs::write(dir.join(format!("{}.cfg", self.config_hash)), config_text)?;
        Ok(path)
    }
}

/// Read every record from a results file.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(RunRecord::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_line_round_trip() {
        let r = RunRecord {
            config_hash: "abc".into(),
            statistic: "h1-norm".into(),
            params: "n=16;t=0.5".into(),
            value: 1.25,
            std_error: Some(0.03),
            replicas: 100,
            wall_ms: 12,
        };
        let line = r.to_line();
        assert_eq!(RunRecord::parse(&line).unwrap(), r);
        assert!(RunRecord::deterministic_part(&line).ends_with("|100"));
        let none = RunRecord {
            std_error: None,
            ..r
        };
        assert_eq!(RunRecord::parse(&none.to_line()).unwrap(), none);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(RunRecord::parse("only|three|fields").is_err());
    }
}
