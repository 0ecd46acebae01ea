//! Output files: CSV tables with `#` header comments, per-point JSON
//! documents, and resume bookkeeping.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const FORMAT_VERSION: &str = "1";

/// One row of the phase-diagram table. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub theta: f64,
    pub chi: usize,
    pub ee: f64,
    pub gap_ratio: f64,
    pub pair_degeneracy: f64,
    pub paired: bool,
    /// `inf` in the CSV when the transfer gap closes.
    pub xi_x: f64,
    pub cx_inf: f64,
    pub cz_inf: f64,
    /// Real part of `⟨ψ|Ĥ|ψ⟩` per site for the rescaled row operator.
    pub per_site_eigenvalue: f64,
    pub converged: bool,
    pub iterations: usize,
    pub solver: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

pub const SCAN_COLUMNS: [&str; 15] = [
    "theta",
    "chi",
    "ee",
    "gap_ratio",
    "pair_degeneracy",
    "paired",
    "xi_x",
    "cx_inf",
    "cz_inf",
    "per_site_eigenvalue",
    "converged",
    "iterations",
    "solver",
    "seed",
    "wall_time_s",
];

/// Identity of a grid point; angles compare by bit pattern after a
/// round trip through their shortest decimal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey {
    pub theta_bits: u64,
    pub chi: usize,
    pub solver: String,
}

impl PointKey {
    pub fn new(theta: f64, chi: usize, solver: &str) -> Self {
        PointKey { theta_bits: theta.to_bits(), chi, solver: solver.to_string() }
    }

    pub fn theta(&self) -> f64 {
        f64::from_bits(self.theta_bits)
    }

    /// File stem used for the per-point JSON document.
    pub fn stem(&self) -> String {
        format!("theta_{}_chi_{}_{}", self.theta(), self.chi, self.solver)
    }
}

impl ScanRecord {
    pub fn key(&self) -> PointKey {
        PointKey::new(self.theta, self.chi, &self.solver)
    }
}

/// Header comment lines shared by every table this tool writes.
pub fn header_lines(command: &str, cfg: &Config, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![
        format!("# edgephase {} ({command})", env!("CARGO_PKG_VERSION")),
        format!("# format_version = {FORMAT_VERSION}"),
        format!("# seed = {}", cfg.seed),
    ];
    for (k, v) in extra {
        lines.push(format!("# {k} = {v}"));
    }
    lines.push(format!("# config = {}", cfg.to_json_line()));
    lines
}

/// Writes a complete CSV table (header comments, column names, rows).
pub fn write_table<T: Serialize>(path: &Path, header: &[String], rows: &[T]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for line in header {
        writeln!(buf, "{line}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(std::io::Error::other)?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Append-only CSV of scan records. Each row is flushed as soon as it is
/// written so an interrupted run leaves every finished point on disk.
pub struct ScanWriter {
    file: File,
}

impl ScanWriter {
    pub fn create(path: &Path, header: &[String]) -> std::io::Result<Self> {
        let mut file = File::create(path)?;
        for line in header {
            writeln!(file, "{line}")?;
        }
        writeln!(file, "{}", SCAN_COLUMNS.join(","))?;
        file.flush()?;
        Ok(ScanWriter { file })
    }

    /// Rewrites `path` with its header and the given (already validated)
    /// records, dropping any torn trailing line, and reopens it for appending.
    pub fn reopen(path: &Path, header: &[String], records: &[ScanRecord]) -> std::io::Result<Self> {
        let mut w = ScanWriter::create(path, header)?;
        for r in records {
            w.append(r)?;
        }
        drop(w);
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(ScanWriter { file })
    }

    pub fn append(&mut self, r: &ScanRecord) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.serialize(r).map_err(std::io::Error::other)?;
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.file.write_all(&bytes)?;
        self.file.flush()
    }
}

pub struct ExistingScan {
    pub header: Vec<String>,
    pub records: Vec<ScanRecord>,
}

/// Reads a scan table, keeping complete records and ignoring a torn last line.
pub fn read_scan(path: &Path) -> std::io::Result<ExistingScan> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    let mut body = String::new();
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') {
            header.push(line);
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut records = Vec::new();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    for row in rdr.deserialize::<ScanRecord>() {
        match row {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}: skipping unreadable row ({e})", path.display());
            }
        }
    }
    Ok(ExistingScan { header, records })
}

pub fn header_value<'a>(header: &'a [String], key: &str) -> Option<&'a str> {
    let prefix = format!("# {key} = ");
    header.iter().find_map(|l| l.strip_prefix(prefix.as_str()))
}
