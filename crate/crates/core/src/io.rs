//! File formats: snapshot CSV + manifest, dictionary/model JSON, result CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SillError};
use crate::regression::{Mode, SnapshotSet};

/// Sidecar describing how to read a snapshot CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotManifest {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders snapshots as CSV with header `y1..ym,d1..dm`.
pub fn snapshots_to_csv(s: &SnapshotSet) -> String {
    let m = s.m();
    let mut out = String::new();
    let header: Vec<String> = (1..=m)
        .map(|i| format!("y{i}"))
        .chain((1..=m).map(|i| format!("d{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..s.len() {
        let row: Vec<String> = s
            .measurements()
            .row(i)
            .iter()
            .chain(s.targets().row(i).iter())
            .map(|&v| fmt_exact(v))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a snapshot CSV. Errors name the 1-based line of the offending record.
pub fn snapshots_from_csv(text: &str, manifest: &SnapshotManifest) -> Result<SnapshotSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let width = headers.len();
    if width == 0 || width % 2 != 0 {
        return Err(parse_err(1, format!("expected an even number of columns, found {width}")));
    }
    let m = width / 2;
    for (k, h) in headers.iter().enumerate() {
        let expected = if k < m { format!("y{}", k + 1) } else { format!("d{}", k - m + 1) };
        if h != expected {
            return Err(parse_err(1, format!("header column {} is '{h}', expected '{expected}'", k + 1)));
        }
    }
    let mut ys = Vec::new();
    let mut ds = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let vals = rec
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("column {} value '{f}' is not a number", k + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        ys.push(vals[..m].to_vec());
        ds.push(vals[m..].to_vec());
    }
    if ys.is_empty() {
        return Err(SillError::EmptySnapshots);
    }
    let y = DMatrix::from_fn(ys.len(), m, |i, j| ys[i][j]);
    let d = DMatrix::from_fn(ds.len(), m, |i, j| ds[i][j]);
    SnapshotSet::new(y, d, manifest.mode, manifest.dt)
}

fn parse_err(line: u64, message: String) -> SillError {
    SillError::Parse { line, message }
}

pub fn read_snapshots(csv_path: &Path, manifest_path: &Path) -> Result<SnapshotSet> {
    let manifest: SnapshotManifest = read_json(manifest_path)?;
    snapshots_from_csv(&fs::read_to_string(csv_path)?, &manifest)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a sibling temp file and renames into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| format!(".{}.tmp", n.to_string_lossy()))
        .unwrap_or_else(|| ".tmp".into());
    tmp.set_file_name(name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Small CSV table builder for result files.
#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}
