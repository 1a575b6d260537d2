//! CSV artifacts. Every numeric column carries its unit in brackets.
//!
//! Values are written with 17 significant digits; CSV is an export format and
//! is not read back into computations except to resume incremental tables.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use vlevel_core::single_pulse::AreaSweepResult;

use crate::error::{Error, Result};
use crate::gridfile::{GridFile, Payload};

pub const SWEEP_COLUMNS: [&str; 7] = [
    "theta_over_pi [pi rad]",
    "pop0 [1]",
    "pop1 [1]",
    "pop2 [1]",
    "coh01 [1]",
    "coh02 [1]",
    "coh12 [1]",
];

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_owned(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_table<S: AsRef<str>>(path: &Path, header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::gridfile::write_atomic(path, &bytes)
}

/// Header and rows of a numeric CSV.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Malformed {
                    path: path.to_owned(),
                    message: format!("non-numeric cell {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_sweep_csv(sweep: &AreaSweepResult, path: &Path) -> Result<()> {
    let rows = (0..sweep.len()).map(|i| {
        vec![
            num(sweep.areas[i] / std::f64::consts::PI),
            num(sweep.pop0[i]),
            num(sweep.pop1[i]),
            num(sweep.pop2[i]),
            num(sweep.coh01[i]),
            num(sweep.coh02[i]),
            num(sweep.coh12[i]),
        ]
    });
    write_table(path, &SWEEP_COLUMNS, rows)
}

/// Long-format export of a grid file: one line per element.
pub fn write_grid_csv(grid: &GridFile, path: &Path) -> Result<()> {
    let [a, b] = &grid.header.axes;
    let mut header = vec![format!("{} [{}]", a.name, a.unit), format!("{} [{}]", b.name, b.unit)];
    let m = b.values.len();
    let rows: Vec<Vec<String>> = match &grid.payload {
        Payload::Complex(v) => {
            header.extend(["re [arb]", "im [arb]", "abs [arb]", "phase [rad]"].map(String::from));
            v.iter()
                .enumerate()
                .map(|(k, z)| {
                    vec![
                        num(a.values[k / m]),
                        num(b.values[k % m]),
                        num(z.re),
                        num(z.im),
                        num(z.norm()),
                        num(z.arg()),
                    ]
                })
                .collect()
        }
        Payload::Real(v) => {
            header.push("value [arb]".into());
            v.iter()
                .enumerate()
                .map(|(k, x)| vec![num(a.values[k / m]), num(b.values[k % m]), num(*x)])
                .collect()
        }
    };
    write_table(path, &header, rows)
}

/// Append-only CSV whose rows are persisted one at a time.
pub struct AppendTable {
    file: File,
    path: PathBuf,
    rows: usize,
}

impl AppendTable {
    /// Opens `path`, keeping existing rows when `resume` is set and the header
    /// matches; otherwise starts a fresh table. A trailing partial line is
    /// discarded.
    pub fn open(path: &Path, header: &[String], resume: bool) -> Result<(Self, Vec<Vec<f64>>)> {
        let io = |e| Error::io(path, e);
        let header_line = header.join(",");
        let mut existing = Vec::new();
        if resume && path.exists() {
            let mut reader = BufReader::new(File::open(path).map_err(io)?);
            let mut line = String::new();
            reader.read_line(&mut line).map_err(io)?;
            if line.trim_end_matches('\n') != header_line {
                return Err(Error::Malformed {
                    path: path.to_owned(),
                    message: "existing table has a different header; cannot resume".into(),
                });
            }
            let mut valid = line.len() as u64;
            loop {
                line.clear();
                if reader.read_line(&mut line).map_err(io)? == 0 || !line.ends_with('\n') {
                    break;
                }
                let row: std::result::Result<Vec<f64>, _> = line.trim_end().split(',').map(str::parse).collect();
                match row {
                    Ok(r) if r.len() == header.len() => existing.push(r),
                    _ => break,
                }
                valid += line.len() as u64;
            }
            let file = OpenOptions::new().write(true).open(path).map_err(io)?;
            file.set_len(valid).map_err(io)?;
            let mut file = OpenOptions::new().append(true).open(path).map_err(io)?;
            file.flush().map_err(io)?;
            let rows = existing.len();
            return Ok((
                Self {
                    file,
                    path: path.to_owned(),
                    rows,
                },
                existing,
            ));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = File::create(path).map_err(io)?;
        writeln!(file, "{header_line}").map_err(io)?;
        file.sync_data().map_err(io)?;
        Ok((
            Self {
                file,
                path: path.to_owned(),
                rows: 0,
            },
            existing,
        ))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn append(&mut self, row: &[f64]) -> Result<()> {
        let line: Vec<String> = row.iter().map(|&x| num(x)).collect();
        let io = |e| Error::io(&self.path, e);
        writeln!(self.file, "{}", line.join(",")).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.rows += 1;
        Ok(())
    }
}
