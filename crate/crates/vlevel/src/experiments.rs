//! Multi-spectrum experiments: Θ1 scans, coherent-control searches and phase
//! maps. Each spectrum is computed with the parallel scan; spectra are
//! processed in grid order so incremental output is a prefix of the final
//! table.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vlevel_core::analysis::{
    control_grid_index, locate_peaks, select_phase_points, ControlRow, ControlSearchResult, PeakLabel,
    PeakRecord, PhaseMap,
};
use vlevel_core::twodcs::{RephasingSetup, Spectrum2D};
use vlevel_core::Propagator;

use crate::config::TwoDSection;
use crate::csvio::AppendTable;
use crate::error::{Error, Result};
use crate::gridfile::write_atomic;
use crate::scan::{hex, scan_rephasing, ScanOptions};
use crate::spectrum::spectrum_2d;

/// Spectrum and peak records for one set of pulse areas.
#[derive(Debug, Clone)]
pub struct AnalysedSpectrum {
    pub areas: [f64; 4],
    pub spectrum: Spectrum2D,
    pub peaks: [PeakRecord; 4],
}

pub fn compute_spectrum(prop: &Propagator, twod: &TwoDSection, setup: RephasingSetup) -> Result<Spectrum2D> {
    let grid = twod.grid();
    let tgrid = scan_rephasing(prop, setup, &grid, &ScanOptions::default())?
        .complete()
        .expect("scan without limits completes");
    Ok(spectrum_2d(&tgrid, twod.zero_pad, twod.window())?)
}

pub fn analyse(prop: &Propagator, twod: &TwoDSection, areas: [f64; 4]) -> Result<AnalysedSpectrum> {
    let spectrum = compute_spectrum(prop, twod, twod.setup(areas))?;
    let peaks = locate_peaks(&spectrum, prop.params(), twod.peak_halfwidth.map(|h| h.0))?;
    Ok(AnalysedSpectrum { areas, spectrum, peaks })
}

/// Maximum amplitude of each peak versus Θ1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta1Curves {
    pub theta1: Vec<f64>,
    /// `amplitude[k][i]` for peak `k` at `theta1[i]`.
    pub amplitude: [Vec<f64>; 4],
    pub phase: [Vec<f64>; 4],
}

impl Theta1Curves {
    pub fn curve(&self, label: PeakLabel) -> &[f64] {
        &self.amplitude[label.index()]
    }
}

/// Spectra for each Θ1 with Θ2..Θ4 fixed. `each` sees every analysed
/// spectrum in order.
pub fn theta1_scan(
    prop: &Propagator,
    twod: &TwoDSection,
    theta1: &[f64],
    fixed: [f64; 3],
    mut each: impl FnMut(&AnalysedSpectrum) -> Result<()>,
) -> Result<Theta1Curves> {
    if theta1.is_empty() {
        return Err(Error::config("theta1", "grid is empty"));
    }
    let mut out = Theta1Curves {
        theta1: theta1.to_vec(),
        amplitude: Default::default(),
        phase: Default::default(),
    };
    for &t1 in theta1 {
        let a = analyse(prop, twod, [t1, fixed[0], fixed[1], fixed[2]])?;
        for k in 0..4 {
            out.amplitude[k].push(a.peaks[k].max_amplitude);
            out.phase[k].push(a.peaks[k].phase_at_max);
        }
        each(&a)?;
    }
    Ok(out)
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn control_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["theta1_over_pi [pi rad]", "theta2_over_pi [pi rad]", "theta3_over_pi [pi rad]"]
        .map(String::from)
        .to_vec();
    for l in PeakLabel::ALL {
        let n = l.name().to_lowercase();
        cols.push(format!("{n}_intensity [arb]"));
        cols.push(format!("{n}_phase [rad]"));
        cols.push(format!("{n}_pv [%]"));
    }
    cols
}

fn row_values(row: &ControlRow) -> Vec<f64> {
    let mut v = row.thetas.map(|t| t / PI).to_vec();
    for k in 0..4 {
        v.extend([row.intensity[k], row.phase[k], row.pv[k]]);
    }
    v
}

fn row_from_values(v: &[f64]) -> ControlRow {
    let mut r = ControlRow {
        thetas: [v[0] * PI, v[1] * PI, v[2] * PI],
        intensity: [0.0; 4],
        phase: [0.0; 4],
        pv: [0.0; 4],
    };
    for k in 0..4 {
        r.intensity[k] = v[3 + 3 * k];
        r.phase[k] = v[4 + 3 * k];
        r.pv[k] = v[5 + 3 * k];
    }
    r
}

/// JSON sidecar of a control search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSidecar {
    pub status: String,
    pub fingerprint: String,
    pub rows_done: usize,
    pub rows_total: usize,
    pub theta1_over_pi: Vec<f64>,
    pub theta2_over_pi: Vec<f64>,
    pub theta3_over_pi: Vec<f64>,
    pub theta4_over_pi: f64,
    /// Per peak: (Θ1, Θ2, Θ3)/π and PV of the best triple.
    pub best: Vec<Option<([f64; 3], f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlOutcome {
    /// The search was already complete; nothing was computed.
    AlreadyComplete(ControlSearchResult),
    Complete(ControlSearchResult),
    Partial { done: usize, total: usize },
}

pub struct ControlSearchJob<'a> {
    pub prop: &'a Propagator,
    pub twod: &'a TwoDSection,
    pub theta: [&'a [f64]; 3],
    pub theta4: f64,
    pub budget: u64,
}

impl ControlSearchJob<'_> {
    pub fn total(&self) -> usize {
        self.theta.iter().map(|g| g.len()).product()
    }

    pub fn required_integrations(&self) -> u64 {
        self.total() as u64 * self.twod.integrations_per_spectrum()
    }

    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let desc = format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}",
            self.prop.params(),
            self.prop.options(),
            self.twod,
            self.theta,
            self.theta4
        );
        hex(&Sha256::digest(desc.as_bytes()))
    }

    fn result(&self, rows: Vec<ControlRow>) -> ControlSearchResult {
        ControlSearchResult {
            theta1_grid: self.theta[0].to_vec(),
            theta2_grid: self.theta[1].to_vec(),
            theta3_grid: self.theta[2].to_vec(),
            theta4: self.theta4,
            rows,
        }
    }

    /// Runs (or continues) the search, persisting each row to `csv_path` and
    /// the sidecar to `sidecar_path`. `row_limit` caps newly computed rows.
    pub fn run(&self, csv_path: &Path, sidecar_path: &Path, resume: bool, row_limit: Option<usize>) -> Result<ControlOutcome> {
        let required = self.required_integrations();
        if required > self.budget {
            return Err(Error::Budget {
                required,
                budget: self.budget,
            });
        }
        let fingerprint = self.fingerprint();
        let total = self.total();
        if let Some(prev) = read_sidecar(sidecar_path)? {
            if prev.fingerprint == fingerprint && prev.status == "complete" && csv_path.exists() {
                let (_, rows) = crate::csvio::read_table(csv_path)?;
                if rows.len() == total {
                    let rows = rows.iter().map(|v| row_from_values(v)).collect();
                    return Ok(ControlOutcome::AlreadyComplete(self.result(rows)));
                }
            }
        }
        let resume = resume && read_sidecar(sidecar_path)?.is_some_and(|p| p.fingerprint == fingerprint);
        let (mut table, existing) = AppendTable::open(csv_path, &control_columns(), resume)?;
        let mut rows: Vec<ControlRow> = existing.iter().map(|v| row_from_values(v)).collect();
        let (n2, n3) = (self.theta[1].len(), self.theta[2].len());
        let mut computed = 0;
        self.write_sidecar(sidecar_path, &fingerprint, &rows)?;
        while rows.len() < total {
            if row_limit.is_some_and(|l| computed >= l) {
                break;
            }
            let (i, j, k) = control_grid_index(rows.len(), n2, n3);
            let thetas = [self.theta[0][i], self.theta[1][j], self.theta[2][k]];
            let a = analyse(self.prop, self.twod, [thetas[0], thetas[1], thetas[2], self.theta4])?;
            let row = ControlRow::from_peaks(thetas, &a.peaks)?;
            table.append(&row_values(&row))?;
            rows.push(row);
            computed += 1;
            self.write_sidecar(sidecar_path, &fingerprint, &rows)?;
        }
        if rows.len() < total {
            return Ok(ControlOutcome::Partial {
                done: rows.len(),
                total,
            });
        }
        Ok(ControlOutcome::Complete(self.result(rows)))
    }

    fn write_sidecar(&self, path: &Path, fingerprint: &str, rows: &[ControlRow]) -> Result<()> {
        let total = self.total();
        let res = self.result(rows.to_vec());
        let over_pi = |g: &[f64]| g.iter().map(|t| t / PI).collect::<Vec<_>>();
        let side = ControlSidecar {
            status: if rows.len() == total { "complete" } else { "partial" }.into(),
            fingerprint: fingerprint.into(),
            rows_done: rows.len(),
            rows_total: total,
            theta1_over_pi: over_pi(self.theta[0]),
            theta2_over_pi: over_pi(self.theta[1]),
            theta3_over_pi: over_pi(self.theta[2]),
            theta4_over_pi: self.theta4 / PI,
            best: res
                .best_per_peak()
                .iter()
                .enumerate()
                .map(|(k, r)| r.map(|r| (r.thetas.map(|t| t / PI), r.pv[k])))
                .collect(),
        };
        let text = serde_json::to_vec_pretty(&side).expect("sidecar serialises");
        write_atomic(path, &text)
    }
}

pub fn read_sidecar(path: &Path) -> Result<Option<ControlSidecar>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map(Some).map_err(|e| Error::Malformed {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Intensity and phase of one peak along Θ1, thresholded.
pub fn phase_map(
    prop: &Propagator,
    twod: &TwoDSection,
    label: PeakLabel,
    theta1: &[f64],
    fixed: [f64; 3],
    threshold: f64,
    each: impl FnMut(&AnalysedSpectrum) -> Result<()>,
) -> Result<(Theta1Curves, PhaseMap)> {
    let curves = theta1_scan(prop, twod, theta1, fixed, each)?;
    let k = label.index();
    let intensity: Vec<f64> = curves.amplitude[k].iter().map(|a| a * a).collect();
    let map = select_phase_points(label, theta1, &intensity, &curves.phase[k], threshold)?;
    Ok((curves, map))
}

/// Reference |ρ01| and |ρ02| after a single pulse of each Θ1, for comparing
/// with Θ1 curves.
pub fn single_pulse_coherences(prop: &Propagator, twod: &TwoDSection, theta1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = crate::scan::sweep_pulse_area(theta1, twod.fwhm.0, twod.duration_convention.into(), prop)?;
    Ok((s.coh01, s.coh02))
}
