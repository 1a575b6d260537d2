//! Peak location, peak visibility and phase bookkeeping on rephasing spectra.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::twodcs::Spectrum2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PeakLabel {
    P1,
    P2,
    P3,
    P4,
}

impl PeakLabel {
    pub const ALL: [PeakLabel; 4] = [PeakLabel::P1, PeakLabel::P2, PeakLabel::P3, PeakLabel::P4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["P1", "P2", "P3", "P4"][self.index()]
    }

    /// `(ωτ, ωt)` in meV relative to the carrier, for a carrier resonant with
    /// the lower transition.
    pub fn expected_center(self, delta: f64) -> (f64, f64) {
        match self {
            PeakLabel::P1 => (-0.0, 0.0),
            PeakLabel::P2 => (-0.0, delta),
            PeakLabel::P3 => (-delta, 0.0),
            PeakLabel::P4 => (-delta, delta),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PeakLabel::ALL.into_iter().find(|l| l.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakRecord {
    pub label: PeakLabel,
    pub expected_center: (f64, f64),
    pub found_center: (f64, f64),
    /// Bin indices of `found_center`.
    pub found_index: (usize, usize),
    pub max_amplitude: f64,
    /// In (−π, π].
    pub phase_at_max: f64,
    pub window_halfwidth: f64,
}

impl PeakRecord {
    /// Squared maximum amplitude.
    pub fn intensity(&self) -> f64 {
        self.max_amplitude * self.max_amplitude
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut r = x % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Searches `|S|` in square windows of half-width `half_width` meV around the
/// four expected peak positions. `None` uses `Δ/3`.
pub fn locate_peaks(spec: &Spectrum2D, params: &SystemParams, half_width: Option<f64>) -> Result<[PeakRecord; 4]> {
    let delta = params.delta;
    let hw = half_width.unwrap_or(delta / 3.0);
    if !(hw > 0.0) {
        return Err(Error::invalid("window_halfwidth", "must be > 0"));
    }
    if 2.0 * hw >= delta {
        return Err(Error::WindowOverlap { half_width: hw, delta });
    }
    let (n, m) = spec.shape();
    let covers = |axis: &[f64], lo: f64, hi: f64| {
        axis.first().is_some_and(|a| *a <= lo) && axis.last().is_some_and(|b| *b >= hi)
    };
    if !covers(&spec.omega_tau_axis, -delta, 0.0) || !covers(&spec.omega_t_axis, 0.0, delta) {
        return Err(Error::invalid("spectrum", "axes do not cover detunings 0 and delta"));
    }
    let in_window = |axis: &[f64], c: f64| -> Vec<usize> {
        (0..axis.len()).filter(|&i| (axis[i] - c).abs() <= hw).collect()
    };
    let mut out = [None; 4];
    for label in PeakLabel::ALL {
        let center = label.expected_center(delta);
        let rows = in_window(&spec.omega_tau_axis, center.0);
        let cols = in_window(&spec.omega_t_axis, center.1);
        if rows.is_empty() || cols.is_empty() {
            // resolution coarser than the window
            return Err(Error::WindowOverlap { half_width: hw, delta });
        }
        let mut best = (rows[0], cols[0]);
        let mut best_amp = -1.0;
        for &i in &rows {
            for &j in &cols {
                let a = spec.at(i, j).norm();
                // strict comparison keeps the first bin on ties
                if a > best_amp {
                    best_amp = a;
                    best = (i, j);
                }
            }
        }
        let z = spec.at(best.0, best.1);
        out[label.index()] = Some(PeakRecord {
            label,
            expected_center: center,
            found_center: (spec.omega_tau_axis[best.0], spec.omega_t_axis[best.1]),
            found_index: best,
            max_amplitude: best_amp,
            phase_at_max: wrap_phase(z.arg()),
            window_halfwidth: hw,
        });
    }
    debug_assert!(n > 0 && m > 0);
    Ok(out.map(|r| r.unwrap()))
}

/// Percent of total peak intensity carried by each peak.
pub fn peak_visibility(peaks: &[PeakRecord; 4]) -> Result<[f64; 4]> {
    visibility_from_amplitudes(peaks.map(|p| p.max_amplitude))
}

pub fn visibility_from_amplitudes(amplitudes: [f64; 4]) -> Result<[f64; 4]> {
    let peak = amplitudes.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::UndefinedVisibility);
    }
    // normalise first so the squares cannot underflow or overflow
    let sq = amplitudes.map(|a| (a / peak) * (a / peak));
    let total: f64 = sq.iter().sum();
    Ok(sq.map(|s| 100.0 * s / total))
}

/// Nearest-branch continuation: each phase moves by its wrapped difference to
/// the previous unwrapped value. A jump of exactly π is taken as +π.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    for (i, &p) in phases.iter().enumerate() {
        if i == 0 {
            out.push(p);
        } else {
            let prev = out[i - 1];
            out.push(prev + wrap_phase(p - prev));
        }
    }
    out
}

/// One point of a phase map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub theta1: f64,
    pub intensity: f64,
    /// Unwrapped along the full Θ1 line.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub label: PeakLabel,
    pub threshold: f64,
    pub max_intensity: f64,
    /// Points with intensity ≥ threshold·max, in Θ1 order.
    pub selected: Vec<PhasePoint>,
    /// Set when nothing was selected.
    pub diagnostic: Option<String>,
}

impl PhaseMap {
    /// `(min, max)` of the selected unwrapped phases.
    pub fn phase_bounds(&self) -> Option<(f64, f64)> {
        let first = self.selected.first()?;
        Some(self.selected.iter().fold((first.phase, first.phase), |(lo, hi), p| {
            (lo.min(p.phase), hi.max(p.phase))
        }))
    }

    pub fn covered_range(&self) -> f64 {
        self.phase_bounds().map_or(0.0, |(lo, hi)| hi - lo)
    }
}

/// Builds a phase map from per-Θ1 peak intensities and wrapped phases.
/// Phases are unwrapped over every point before thresholding so gaps in the
/// selection do not break continuity.
pub fn select_phase_points(
    label: PeakLabel,
    theta1: &[f64],
    intensity: &[f64],
    wrapped_phase: &[f64],
    threshold: f64,
) -> Result<PhaseMap> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("threshold", format!("must lie in (0, 1], got {threshold}")));
    }
    if theta1.len() != intensity.len() || theta1.len() != wrapped_phase.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} areas, {} intensities, {} phases",
            theta1.len(),
            intensity.len(),
            wrapped_phase.len()
        )));
    }
    if theta1.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("theta1_grid", "must be strictly increasing"));
    }
    let unwrapped = unwrap_phases(wrapped_phase);
    let max_intensity = intensity.iter().copied().fold(0.0f64, f64::max);
    let cut = threshold * max_intensity;
    let selected: Vec<PhasePoint> = (0..theta1.len())
        .filter(|&i| max_intensity > 0.0 && intensity[i] >= cut)
        .map(|i| PhasePoint {
            theta1: theta1[i],
            intensity: intensity[i],
            phase: unwrapped[i],
        })
        .collect();
    let diagnostic = selected
        .is_empty()
        .then(|| String::from("no point reaches the intensity threshold (all intensities zero)"));
    Ok(PhaseMap {
        label,
        threshold,
        max_intensity,
        selected,
        diagnostic,
    })
}

/// One pulse-area triple of a control search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlRow {
    /// (Θ1, Θ2, Θ3) in rad.
    pub thetas: [f64; 3],
    pub intensity: [f64; 4],
    pub phase: [f64; 4],
    /// Percent.
    pub pv: [f64; 4],
}

impl ControlRow {
    pub fn from_peaks(thetas: [f64; 3], peaks: &[PeakRecord; 4]) -> Result<Self> {
        Ok(Self {
            thetas,
            intensity: peaks.map(|p| p.intensity()),
            phase: peaks.map(|p| p.phase_at_max),
            pv: peak_visibility(peaks)?,
        })
    }

    /// Peak with the largest PV; ties go to the lower label.
    pub fn dominant(&self) -> PeakLabel {
        let mut best = 0;
        for i in 1..4 {
            if self.pv[i] > self.pv[best] {
                best = i;
            }
        }
        PeakLabel::ALL[best]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSearchResult {
    pub theta1_grid: Vec<f64>,
    pub theta2_grid: Vec<f64>,
    pub theta3_grid: Vec<f64>,
    pub theta4: f64,
    /// Grid order, Θ1 slowest.
    pub rows: Vec<ControlRow>,
}

impl ControlSearchResult {
    pub fn expected_rows(&self) -> usize {
        self.theta1_grid.len() * self.theta2_grid.len() * self.theta3_grid.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.expected_rows()
    }

    /// Triple maximising each peak's PV; first occurrence wins ties.
    pub fn best_per_peak(&self) -> [Option<ControlRow>; 4] {
        let mut best: [Option<ControlRow>; 4] = [None; 4];
        for row in &self.rows {
            for k in 0..4 {
                if best[k].is_none_or(|b| row.pv[k] > b.pv[k]) {
                    best[k] = Some(*row);
                }
            }
        }
        best
    }
}

/// `Θ1, Θ2, Θ3` indices of the `index`-th row, Θ1 slowest.
pub fn control_grid_index(index: usize, n2: usize, n3: usize) -> (usize, usize, usize) {
    (index / (n2 * n3), (index / n3) % n2, index % n3)
}
