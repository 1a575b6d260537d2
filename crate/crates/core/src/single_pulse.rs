//! Single-pulse experiments: pulse-area sweeps, the impulsive-limit oracle and
//! Rabi-period extraction.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{DurationConvention, Pulse, SystemParams};
use crate::obe::Propagator;

/// State right after an instantaneous pulse of area `area` (defined w.r.t.
/// μ01) and phase `phase` acting on the ground state. No relaxation.
///
/// The pulse only couples the ground state to the bright superposition
/// `(μ01|1⟩ + μ02|2⟩)/μeff`, which Rabi-flops with area `Θ·μeff/μ01`.
pub fn delta_pulse_oracle_with_phase(area: f64, phase: f64, params: &SystemParams) -> DensityMatrix {
    let mu_eff = params.mu_eff();
    let theta_eff = area * mu_eff / params.mu01;
    let (s, c) = (0.5 * theta_eff).sin_cos();
    let excite = Complex64::new(0.0, 1.0) * Complex64::from_polar(s / mu_eff, -phase);
    DensityMatrix::pure([
        Complex64::new(c, 0.0),
        excite * params.mu01,
        excite * params.mu02(),
    ])
}

pub fn delta_pulse_oracle(area: f64, params: &SystemParams) -> DensityMatrix {
    delta_pulse_oracle_with_phase(area, 0.0, params)
}

/// Populations and coherence magnitudes after a single pulse, one entry per
/// pulse area.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AreaSweepResult {
    pub areas: Vec<f64>,
    pub pop0: Vec<f64>,
    pub pop1: Vec<f64>,
    pub pop2: Vec<f64>,
    pub coh01: Vec<f64>,
    pub coh02: Vec<f64>,
    pub coh12: Vec<f64>,
    pub fwhm: f64,
    pub delta: f64,
    pub params: SystemParams,
}

impl AreaSweepResult {
    pub fn new(fwhm: f64, params: SystemParams) -> Self {
        Self {
            fwhm,
            delta: params.delta,
            params,
            ..Default::default()
        }
    }

    pub fn push(&mut self, area: f64, rho: &DensityMatrix) {
        self.areas.push(area);
        self.pop0.push(rho.population(0));
        self.pop1.push(rho.population(1));
        self.pop2.push(rho.population(2));
        self.coh01.push(rho.coherence(1, 0));
        self.coh02.push(rho.coherence(2, 0));
        self.coh12.push(rho.coherence(2, 1));
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    /// Largest violation of: populations sum to one, lie in `[0, 1]`, and
    /// `|ρjk| ≤ √(ρjj·ρkk)`.
    pub fn invariant_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            let p = [self.pop0[i], self.pop1[i], self.pop2[i]];
            worst = worst.max((p[0] + p[1] + p[2] - 1.0).abs());
            for &x in &p {
                worst = worst.max(-x).max(x - 1.0);
            }
            let bound = |c: f64, a: f64, b: f64| c - (a.max(0.0) * b.max(0.0)).sqrt();
            worst = worst.max(bound(self.coh01[i], p[0], p[1]));
            worst = worst.max(bound(self.coh02[i], p[0], p[2]));
            worst = worst.max(bound(self.coh12[i], p[1], p[2]));
        }
        worst
    }
}

/// State at the detection epoch after one resonant pulse of area `area`
/// centred at t = 0, starting from the ground state.
pub fn single_pulse_state(
    prop: &Propagator,
    area: f64,
    fwhm: f64,
    duration: DurationConvention,
) -> Result<DensityMatrix> {
    let pulse = Pulse::with_convention(area, fwhm, 0.0, 0.0, duration)?;
    let pulses = [pulse];
    let t0 = prop.start_time(&pulses);
    let t1 = prop.detection_time(&pulses);
    prop.propagate(&DensityMatrix::ground(), t0, t1, &pulses, None)
        .map_err(|e| Error::AtArea {
            area,
            source: Box::new(e),
        })
}

/// Serial pulse-area sweep. The `vlevel` crate provides the parallel version.
pub fn sweep_pulse_area(
    area_grid: &[f64],
    fwhm: f64,
    duration: DurationConvention,
    prop: &Propagator,
) -> Result<AreaSweepResult> {
    validate_area_grid(area_grid)?;
    let mut out = AreaSweepResult::new(fwhm, *prop.params());
    for &a in area_grid {
        out.push(a, &single_pulse_state(prop, a, fwhm, duration)?);
    }
    Ok(out)
}

pub fn validate_area_grid(area_grid: &[f64]) -> Result<()> {
    if area_grid.is_empty() {
        return Err(Error::invalid("area_grid", "must not be empty"));
    }
    if area_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("area_grid", "must be nondecreasing"));
    }
    if area_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::invalid("area_grid", "areas must be finite and >= 0"));
    }
    Ok(())
}

/// Evenly spaced areas `start, start+step, …` up to and including `stop`.
pub fn area_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// Interior local minima of `values` over `x`, refined by a three-point
/// parabola. On plateaus the smallest abscissa wins.
pub fn local_minima(x: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b < a && b <= c {
            out.push(parabolic_vertex(x[i - 1], x[i], x[i + 1], a, b, c));
        }
    }
    out
}

fn parabolic_vertex(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if !(a > 0.0) {
        return (x1, y1);
    }
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let c = y1 - a * x1 * x1 - b * x1;
    (xv, a * xv * xv + b * xv + c)
}

fn mean_spacing(minima: &[(f64, f64)]) -> Result<f64> {
    if minima.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 minima, found {}",
            minima.len()
        )));
    }
    let first = minima[0].0;
    let last = minima[minima.len() - 1].0;
    Ok((last - first) / (minima.len() - 1) as f64)
}

/// Θ-period of a ground-state population curve from the spacing of its
/// local minima.
pub fn extract_rabi_period(areas: &[f64], pop0: &[f64]) -> Result<f64> {
    check_curve(areas, pop0)?;
    mean_spacing(&local_minima(areas, pop0))
}

/// Spacing of global revivals: minima of `1 − ρ00` no deeper than
/// `max_depth`. A curve starting at Θ = 0 in the ground state counts that
/// point as the first revival.
pub fn extract_revival_period(areas: &[f64], pop0: &[f64], max_depth: f64) -> Result<f64> {
    check_curve(areas, pop0)?;
    let loss: Vec<f64> = pop0.iter().map(|p| 1.0 - p).collect();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    if areas[0] == 0.0 && loss[0] <= max_depth {
        minima.push((0.0, loss[0]));
    }
    minima.extend(local_minima(areas, &loss).into_iter().filter(|m| m.1 <= max_depth));
    mean_spacing(&minima)
}

fn check_curve(areas: &[f64], values: &[f64]) -> Result<()> {
    if areas.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} areas vs {} values",
            areas.len(),
            values.len()
        )));
    }
    if areas.len() < 3 {
        return Err(Error::InsufficientData(format!("{} samples", areas.len())));
    }
    Ok(())
}

/// Abscissae where `a − b` changes sign, linearly interpolated.
pub fn crossings(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..x.len().saturating_sub(1) {
        let d0 = a[i] - b[i];
        let d1 = a[i + 1] - b[i + 1];
        if d0 == 0.0 && i > 0 {
            out.push(x[i]);
        } else if d0 * d1 < 0.0 {
            out.push(x[i] + (x[i + 1] - x[i]) * d0 / (d0 - d1));
        }
    }
    out
}
