//! Run directories, report rows and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Utc};
use fixlab_core::fix::FixResult;
use fixlab_core::types::{Price, PriceStream};
use serde::{Deserialize, Serialize};

use crate::config::{Period, RunConfig};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    /// Data rows, header excluded.
    pub rows: u64,
}

/// A fresh output directory for one invocation.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<OutputRecord>,
}

impl RunDir {
    /// Create `<base>/<command>-<UTC timestamp>`, adding a counter when a
    /// directory of that name already exists.
    pub fn create(base: &Path, command: &str) -> Result<Self, CliError> {
        let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", base.display()));
        fs::create_dir_all(base).map_err(io)?;
        let stamp = Utc::now().format("%Y%m%dT%H%M%S%3fZ");
        for n in 0.. {
            let name = if n == 0 {
                format!("{command}-{stamp}")
            } else {
                format!("{command}-{stamp}-{n}")
            };
            let path = base.join(name);
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        outputs: Vec::new(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io(e)),
            }
        }
        unreachable!("unbounded counter")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }

    /// Write one CSV through `body` and record its row count.
    pub fn write_csv<E: std::fmt::Display>(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path.join(name);
        let fail = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
        let file = File::create(&path).map_err(|e| fail(&e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| fail(&e))?;
        w.flush().map_err(|e| fail(&e))?;
        drop(w);
        let rows = count_rows(&path).map_err(|e| fail(&e))?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            rows,
        });
        Ok(path)
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<PathBuf, CliError> {
        let path = self.path.join(MANIFEST);
        let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn count_rows(path: &Path) -> std::io::Result<u64> {
    let mut file = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    let mut lines = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        lines += buf[..n].iter().filter(|&&b| b == b'\n').count() as u64;
    }
    Ok(lines.saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub scenario: Option<u64>,
    pub correlation: u64,
}

/// What a run did and with which settings. `created_at` is the only field
/// that differs between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub created_at: String,
    pub period: Period,
    pub pair: Option<String>,
    pub seeds: Seeds,
    pub config: RunConfig,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// One line of the fix report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixRow {
    pub pair: String,
    pub date: NaiveDate,
    pub mid: Price,
    pub fix_bid: Price,
    pub fix_ask: Price,
    pub spread_used: Price,
    pub market_spread: Option<Price>,
    pub n_trade_points: usize,
    pub used_quote_fallback: bool,
    pub source_used: String,
}

impl FixRow {
    pub fn new(pair: &str, date: NaiveDate, fix: &FixResult) -> Self {
        Self {
            pair: pair.to_string(),
            date,
            mid: fix.mid,
            fix_bid: fix.fix_bid,
            fix_ask: fix.fix_ask,
            spread_used: fix.spread_used,
            market_spread: fix.market_spread,
            n_trade_points: fix.n_trade_points,
            used_quote_fallback: fix.used_quote_fallback,
            source_used: fix.source_used.to_string(),
        }
    }
}

pub fn write_fix_rows(writer: impl Write, rows: &[FixRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "pair",
            "date",
            "mid",
            "fix_bid",
            "fix_ask",
            "spread_used",
            "market_spread",
            "n_trade_points",
            "used_quote_fallback",
            "source_used",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fix_rows(reader: impl Read) -> csv::Result<Vec<FixRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Directional correlation of centred events with an external series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub stream: PriceStream,
    pub minute: usize,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub shuffles: usize,
}

pub fn write_correlation_rows(writer: impl Write, rows: &[CorrelationRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["stream", "minute", "r", "p_value", "n", "shuffles"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_correlation_rows(reader: impl Read) -> csv::Result<Vec<CorrelationRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixlab_core::fix::SourceUsed;

    #[test]
    fn fix_rows_round_trip() {
        let fix = FixResult {
            mid: "1.30001".parse().unwrap(),
            fix_bid: "1.29991".parse().unwrap(),
            fix_ask: "1.30011".parse().unwrap(),
            spread_used: "0.0002".parse().unwrap(),
            market_spread: None,
            n_trade_points: 40,
            used_quote_fallback: false,
            source_used: SourceUsed::Pooled,
        };
        let rows = vec![FixRow::new("EURUSD", NaiveDate::from_ymd_opt(2012, 1, 3).unwrap(), &fix)];
        let mut buf = Vec::new();
        write_fix_rows(&mut buf, &rows).unwrap();
        assert_eq!(read_fix_rows(buf.as_slice()).unwrap(), rows);
        let mut empty = Vec::new();
        write_fix_rows(&mut empty, &[]).unwrap();
        assert!(read_fix_rows(empty.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn run_dirs_are_never_reused() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), "vol").unwrap();
        let b = RunDir::create(tmp.path(), "vol").unwrap();
        assert_ne!(a.path(), b.path());
    }

    #[test]
    fn row_counts_exclude_the_header() {
        let tmp = tempfile::tempdir().unwrap();
        let mut dir = RunDir::create(tmp.path(), "x").unwrap();
        dir.write_csv("a.csv", |w| w.write_all(b"h\n1\n2\n")).unwrap();
        assert_eq!(dir.outputs()[0].rows, 2);
    }
}
