//! Parallel sweeps and rephasing scans with row-granular checkpointing.
//!
//! Rows are pure functions of their index, so results do not depend on the
//! number of workers or on how often a scan was interrupted. All checkpoint
//! writes happen on the calling thread.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};
use vlevel_core::single_pulse::{single_pulse_state, validate_area_grid, AreaSweepResult};
use vlevel_core::twodcs::{DelayGrid, RephasingEngine, RephasingSetup, TimeDomainGrid};
use vlevel_core::{DurationConvention, Propagator};

use crate::error::{Error, Result};

/// Parallel pulse-area sweep; identical to the serial sweep in `vlevel_core`.
pub fn sweep_pulse_area(
    area_grid: &[f64],
    fwhm: f64,
    duration: DurationConvention,
    prop: &Propagator,
) -> Result<AreaSweepResult> {
    validate_area_grid(area_grid)?;
    let states = area_grid
        .par_iter()
        .map(|&a| single_pulse_state(prop, a, fwhm, duration))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = AreaSweepResult::new(fwhm, *prop.params());
    for (&a, rho) in area_grid.iter().zip(&states) {
        out.push(a, rho);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct ScanOptions<'a> {
    /// Append-only row store; resumed when it matches the job.
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many newly computed rows.
    pub row_limit: Option<usize>,
    pub cancel: Option<&'a AtomicBool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanOutcome {
    Complete(TimeDomainGrid),
    Partial { done: usize, total: usize },
}

impl ScanOutcome {
    pub fn complete(self) -> Option<TimeDomainGrid> {
        match self {
            ScanOutcome::Complete(g) => Some(g),
            ScanOutcome::Partial { .. } => None,
        }
    }
}

/// Hash of everything that determines the numbers in a scan.
pub fn scan_fingerprint(prop: &Propagator, setup: &RephasingSetup, grid: &DelayGrid) -> String {
    // Debug output of f64 is the shortest round-trip representation.
    let desc = format!("{:?}|{:?}|{:?}|{:?}", prop.params(), prop.options(), setup, grid);
    hex(&Sha256::digest(desc.as_bytes()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Computes the rephasing signal on every grid point.
pub fn scan_rephasing(
    prop: &Propagator,
    setup: RephasingSetup,
    grid: &DelayGrid,
    opts: &ScanOptions,
) -> Result<ScanOutcome> {
    let engine = RephasingEngine::new(prop, setup)?;
    grid.validate(prop.params())?;
    if grid.population_time != setup.population_time {
        return Err(Error::config("population_time", "grid and setup disagree"));
    }
    let (n, m) = grid.shape();
    let mut rows: Vec<Option<Vec<Complex64>>> = vec![None; n];
    let mut store = match &opts.checkpoint {
        Some(path) => {
            let fp = scan_fingerprint(prop, &setup, grid);
            let (store, existing) = RowStore::open(path, &fp, n, m)?;
            for (i, r) in existing {
                rows[i] = Some(r);
            }
            Some(store)
        }
        None => None,
    };

    let mut missing: Vec<usize> = (0..n).filter(|&i| rows[i].is_none()).collect();
    if let Some(limit) = opts.row_limit {
        missing.truncate(limit);
    }
    let cancel = opts.cancel;
    let compute = |i: usize| -> Option<Result<Vec<Complex64>>> {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return None;
        }
        Some(engine.row(grid.tau_axis[i], &grid.t_axis).map_err(Error::from))
    };

    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<Complex64>>)>();
    let mut first_error = None;
    std::thread::scope(|s| {
        s.spawn(move || {
            missing.par_iter().for_each_with(tx, |tx, &i| {
                if let Some(r) = compute(i) {
                    let _ = tx.send((i, r));
                }
            });
        });
        for (i, r) in rx {
            match r {
                Ok(row) => {
                    if let Some(st) = store.as_mut() {
                        if let Err(e) = st.append(i, &row) {
                            first_error.get_or_insert(e);
                        }
                    }
                    rows[i] = Some(row);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }

    let done = rows.iter().filter(|r| r.is_some()).count();
    if done < n {
        return Ok(ScanOutcome::Partial { done, total: n });
    }
    let values: Vec<Complex64> = rows.into_iter().flatten().flatten().collect();
    debug_assert_eq!(values.len(), n * m);
    Ok(ScanOutcome::Complete(TimeDomainGrid::new(values, grid.clone(), engine.excitation())?))
}

const CHECKPOINT_FORMAT: &str = "vlevel-checkpoint/1";

/// Header line, then fixed-size records `u64 row index` + `2m` f64, all
/// little-endian.
struct RowStore {
    file: File,
    path: PathBuf,
    m: usize,
}

impl RowStore {
    fn open(path: &Path, fingerprint: &str, n: usize, m: usize) -> Result<(Self, Vec<(usize, Vec<Complex64>)>)> {
        let header = format!(
            "{}\n",
            serde_json::json!({"format": CHECKPOINT_FORMAT, "fingerprint": fingerprint, "rows": n, "cols": m})
        );
        let io = |e| Error::io(path, e);
        let mut existing = Vec::new();
        if path.exists() {
            let mut reader = BufReader::new(File::open(path).map_err(io)?);
            let mut line = String::new();
            reader.read_line(&mut line).map_err(io)?;
            if line != header {
                return Err(Error::Malformed {
                    path: path.to_owned(),
                    message: "checkpoint belongs to a different job; remove it or change the output directory".into(),
                });
            }
            let rec = 8 + 16 * m;
            let mut buf = vec![0u8; rec];
            let mut valid = header.len() as u64;
            loop {
                match read_full(&mut reader, &mut buf).map_err(io)? {
                    n_read if n_read == rec => {}
                    _ => break,
                }
                let idx = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
                if idx >= n {
                    return Err(Error::Malformed {
                        path: path.to_owned(),
                        message: format!("row index {idx} out of range"),
                    });
                }
                let row = buf[8..]
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect();
                existing.push((idx, row));
                valid += rec as u64;
            }
            let mut file = OpenOptions::new().write(true).open(path).map_err(io)?;
            // drop a record cut short by an interruption
            file.set_len(valid).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
            Ok((
                Self {
                    file,
                    path: path.to_owned(),
                    m,
                },
                existing,
            ))
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut file = File::create(path).map_err(io)?;
            file.write_all(header.as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
            Ok((
                Self {
                    file,
                    path: path.to_owned(),
                    m,
                },
                existing,
            ))
        }
    }

    fn append(&mut self, idx: usize, row: &[Complex64]) -> Result<()> {
        debug_assert_eq!(row.len(), self.m);
        let mut buf = Vec::with_capacity(8 + 16 * row.len());
        buf.extend_from_slice(&(idx as u64).to_le_bytes());
        for z in row {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        let io = |e| Error::io(&self.path, e);
        self.file.write_all(&buf).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => break,
            k => got += k,
        }
    }
    Ok(got)
}
