//! Collinear four-pulse rephasing simulation.
//!
//! Pulses A*, B, C, D* arrive at `0`, `τ`, `τ+T` and `τ+T+t`. For every
//! `(τ, t)` the train is integrated once per phase combination and the
//! detected populations are combined by [`PhaseCycleScheme::extract`].
//!
//! Each run is split at the opening of pulse C's window and, when pulse D's
//! window starts after C's closes, at the end of C's window. The state at the
//! first split depends only on `(τ, φ1, φ2)` and the second only on
//! `(τ, φ1, φ2, φ3)`, so [`RephasingEngine::row`] reuses them along `t`
//! while producing exactly the same numbers as [`RephasingEngine::run_sequence`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::constants::PLANCK;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{DurationConvention, Pulse, SystemParams};
use crate::obe::Propagator;
use crate::phase_cycle::PhaseCycleScheme;

/// Detected observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detection {
    /// `ρ11 + ρ22`.
    #[default]
    Population,
    /// `μ01²ρ11 + μ02²ρ22`, normalised by `μ01²`.
    EmissionWeighted,
}

impl Detection {
    pub fn detect(&self, rho: &DensityMatrix, params: &SystemParams) -> f64 {
        match self {
            Detection::Population => rho.population(1) + rho.population(2),
            Detection::EmissionWeighted => {
                rho.population(1) + params.mu_ratio * params.mu_ratio * rho.population(2)
            }
        }
    }
}

/// Uniform delay axes for a rephasing scan with fixed population time.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    pub tau_axis: Vec<f64>,
    pub population_time: f64,
    pub t_axis: Vec<f64>,
}

impl DelayGrid {
    /// `n` points from 0 with spacing `step` on both axes.
    pub fn square(n: usize, step: f64, population_time: f64) -> Self {
        let axis: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        Self {
            tau_axis: axis.clone(),
            population_time,
            t_axis: axis,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !(self.population_time >= 0.0 && self.population_time.is_finite()) {
            return Err(Error::invalid("population_time", "must be finite and >= 0"));
        }
        let nyquist = nyquist_step(params);
        for (name, axis) in [("tau_axis", &self.tau_axis), ("t_axis", &self.t_axis)] {
            let step = axis_step(name, axis)?;
            if let Some(step) = step {
                if step >= nyquist {
                    return Err(Error::invalid(
                        if name == "tau_axis" { "tau_step" } else { "t_step" },
                        format!("step {step} fs violates the Nyquist limit {nyquist:.1} fs for delta = {} meV", params.delta),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.tau_axis.len(), self.t_axis.len())
    }
}

/// Largest delay step that resolves the splitting `Δ`: `h/(2Δ)`.
pub fn nyquist_step(params: &SystemParams) -> f64 {
    PLANCK / (2.0 * params.delta)
}

/// Checks that an axis is nonnegative, strictly increasing and uniform;
/// returns its step (`None` for a single point).
pub fn axis_step(name: &'static str, axis: &[f64]) -> Result<Option<f64>> {
    if axis.is_empty() {
        return Err(Error::invalid(name, "axis is empty"));
    }
    if axis.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid(name, "delays must be finite and >= 0"));
    }
    if axis.len() == 1 {
        return Ok(None);
    }
    let step = axis[1] - axis[0];
    if !(step > 0.0) {
        return Err(Error::invalid(name, "axis must be strictly increasing"));
    }
    for (i, w) in axis.windows(2).enumerate() {
        let s = w[1] - w[0];
        if !(s > 0.0) {
            return Err(Error::invalid(name, "axis must be strictly increasing"));
        }
        let expected = axis[0] + step * (i + 1) as f64;
        if (w[1] - expected).abs() > 1e-9 * step.max(expected.abs()) {
            return Err(Error::NonUniformAxis(name));
        }
    }
    Ok(Some(step))
}

/// What produced a time-domain grid or spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    pub areas: [f64; 4],
    pub fwhm: f64,
    pub duration: DurationConvention,
    pub params: SystemParams,
}

/// Complex rephasing signal indexed `(τ, t)`, τ slow.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainGrid {
    pub values: Vec<Complex64>,
    pub axes: DelayGrid,
    pub excitation: Excitation,
}

impl TimeDomainGrid {
    pub fn new(values: Vec<Complex64>, axes: DelayGrid, excitation: Excitation) -> Result<Self> {
        let (n, m) = axes.shape();
        if values.len() != n * m {
            return Err(Error::DimensionMismatch(format!("{} values for a {n}×{m} grid", values.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("values", "grid holds non-finite values"));
        }
        Ok(Self { values, axes, excitation })
    }

    pub fn at(&self, i_tau: usize, i_t: usize) -> Complex64 {
        self.values[i_tau * self.axes.t_axis.len() + i_t]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.axes.shape()
    }
}

/// Complex 2D spectrum indexed `(ωτ, ωt)`, ωτ slow. Axes are detunings from
/// the laser carrier in meV; rephasing absorption frequencies are negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub values: Vec<Complex64>,
    pub omega_tau_axis: Vec<f64>,
    pub omega_t_axis: Vec<f64>,
    pub excitation: Option<Excitation>,
}

impl Spectrum2D {
    pub fn new(values: Vec<Complex64>, omega_tau_axis: Vec<f64>, omega_t_axis: Vec<f64>) -> Result<Self> {
        if values.len() != omega_tau_axis.len() * omega_t_axis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}×{} spectrum",
                values.len(),
                omega_tau_axis.len(),
                omega_t_axis.len()
            )));
        }
        Ok(Self {
            values,
            omega_tau_axis,
            omega_t_axis,
            excitation: None,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.omega_tau_axis.len(), self.omega_t_axis.len())
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.omega_t_axis.len() + j]
    }

    /// Swaps the two frequency axes and negates both, which maps the
    /// rephasing peak pattern onto itself with the cross peaks exchanged.
    pub fn mirrored_transpose(&self) -> Self {
        let (n, m) = self.shape();
        let mut values = Vec::with_capacity(n * m);
        for a in 0..m {
            for b in 0..n {
                values.push(self.at(n - 1 - b, m - 1 - a));
            }
        }
        let flip = |axis: &[f64]| axis.iter().rev().map(|v| -v).collect::<Vec<_>>();
        Self {
            values,
            omega_tau_axis: flip(&self.omega_t_axis),
            omega_t_axis: flip(&self.omega_tau_axis),
            excitation: self.excitation,
        }
    }
}

/// Pulse areas, duration and phase cycling for a rephasing experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RephasingSetup {
    pub areas: [f64; 4],
    pub fwhm: f64,
    pub duration: DurationConvention,
    pub population_time: f64,
    pub scheme: PhaseCycleScheme,
    pub detection: Detection,
}

impl RephasingSetup {
    pub fn new(areas: [f64; 4], fwhm: f64, population_time: f64) -> Self {
        Self {
            areas,
            fwhm,
            duration: DurationConvention::default(),
            population_time,
            scheme: PhaseCycleScheme::default(),
            detection: Detection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.areas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("areas", "must be finite and >= 0"));
        }
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(Error::invalid("fwhm", format!("must be > 0, got {}", self.fwhm)));
        }
        if !(self.population_time >= 0.0) {
            return Err(Error::invalid("population_time", "must be >= 0"));
        }
        self.scheme.validate()
    }
}

/// Delays `(τ, T, t)` in fs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub tau: f64,
    pub population_time: f64,
    pub t: f64,
}

/// Split points of one pulse-train integration.
#[derive(Debug, Clone, Copy)]
struct Stages {
    start: f64,
    c_open: f64,
    /// Present when D's window opens after C's closes.
    c_close: Option<f64>,
    end: f64,
}

pub struct RephasingEngine<'a> {
    prop: &'a Propagator,
    setup: RephasingSetup,
}

impl<'a> RephasingEngine<'a> {
    pub fn new(prop: &'a Propagator, setup: RephasingSetup) -> Result<Self> {
        setup.validate()?;
        Ok(Self { prop, setup })
    }

    pub fn setup(&self) -> &RephasingSetup {
        &self.setup
    }

    pub fn pulses(&self, phases: &[f64; 4], delays: Delays) -> Result<[Pulse; 4]> {
        if !(delays.tau >= 0.0 && delays.population_time >= 0.0 && delays.t >= 0.0) {
            return Err(Error::invalid("delays", "must be >= 0"));
        }
        let centers = [
            0.0,
            delays.tau,
            delays.tau + delays.population_time,
            delays.tau + delays.population_time + delays.t,
        ];
        let mk = |i: usize| {
            Pulse::with_convention(self.setup.areas[i], self.setup.fwhm, centers[i], phases[i], self.setup.duration)
        };
        Ok([mk(0)?, mk(1)?, mk(2)?, mk(3)?])
    }

    fn stages(&self, pulses: &[Pulse; 4]) -> Stages {
        let pad = self.prop.options().pulse_padding;
        let (c_lo, c_hi) = pulses[2].support(pad);
        let d_lo = pulses[3].support(pad).0;
        let start = self.prop.start_time(pulses);
        Stages {
            start,
            c_open: c_lo.max(start),
            c_close: (d_lo >= c_hi).then_some(c_hi),
            end: self.prop.detection_time(pulses),
        }
    }

    fn detect(&self, y: &[f64; 9]) -> f64 {
        self.setup.detection.detect(&DensityMatrix::from_compact(y), self.prop.params())
    }

    fn finish(&self, y: [f64; 9], t: f64) -> Result<f64> {
        let rho = DensityMatrix::from_compact(&y);
        rho.check(crate::obe::INSTABILITY_TOL, t)?;
        Ok(self.setup.detection.detect(&rho, self.prop.params()))
    }

    /// Detected signal for one phase combination.
    pub fn run_sequence(&self, phases: &[f64; 4], delays: Delays) -> Result<f64> {
        let pulses = self.pulses(phases, delays)?;
        let st = self.stages(&pulses);
        let p = self.prop;
        let mut y = DensityMatrix::ground().to_compact();
        y = p.propagate_compact(y, st.start, st.c_open, &pulses, None)?;
        let mut t = st.c_open;
        if let Some(c_close) = st.c_close {
            y = p.propagate_compact(y, t, c_close, &pulses, None)?;
            t = c_close;
        }
        y = p.propagate_compact(y, t, st.end, &pulses, None)?;
        self.finish(y, st.end)
    }

    /// Phase-cycled rephasing component at one `(τ, t)`.
    pub fn phase_cycle_point(&self, tau: f64, t: f64) -> Result<Complex64> {
        Ok(self.row(tau, &[t])?[0])
    }

    /// Rephasing components along `t_axis` at fixed `τ`.
    pub fn row(&self, tau: f64, t_axis: &[f64]) -> Result<Vec<Complex64>> {
        let scheme = &self.setup.scheme;
        let [n1, n2, n3, n4] = scheme.steps;
        let n_total = scheme.combinations_count() as f64;
        let p = self.prop;
        let big_t = self.setup.population_time;
        let delays = |t: f64| Delays { tau, population_time: big_t, t };
        let ground = DensityMatrix::ground().to_compact();

        // states at C's window opening, keyed (k1, k2)
        let t_ref = t_axis.first().copied().unwrap_or(0.0);
        let mut after_ab = Vec::with_capacity(n1 * n2);
        let mut c_open = 0.0;
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let phases = [scheme.phase(0, k1), scheme.phase(1, k2), 0.0, 0.0];
                let pulses = self.pulses(&phases, delays(t_ref))?;
                let st = self.stages(&pulses);
                c_open = st.c_open;
                after_ab.push(p.propagate_compact(ground, st.start, st.c_open, &pulses, None)?);
            }
        }

        // states at C's window closing, keyed (k1, k2, k3); filled on first use
        let mut after_c: Vec<Option<(f64, [f64; 9])>> = vec![None; n1 * n2 * n3];
        let mut out = Vec::with_capacity(t_axis.len());
        for &t in t_axis {
            let mut acc = Complex64::new(0.0, 0.0);
            for k1 in 0..n1 {
                for k2 in 0..n2 {
                    let y_ab = after_ab[k1 * n2 + k2];
                    for k3 in 0..n3 {
                        for k4 in 0..n4 {
                            let combo = scheme.combo([k1, k2, k3, k4], n_total);
                            let pulses = self.pulses(&combo.phases, delays(t))?;
                            let st = self.stages(&pulses);
                            let (t_mid, y_mid) = match st.c_close {
                                Some(c_close) => {
                                    let slot = &mut after_c[(k1 * n2 + k2) * n3 + k3];
                                    match slot {
                                        Some((tc, y)) if *tc == c_close => (c_close, *y),
                                        _ => {
                                            let y = p.propagate_compact(y_ab, c_open, c_close, &pulses, None)?;
                                            *slot = Some((c_close, y));
                                            (c_close, y)
                                        }
                                    }
                                }
                                None => (c_open, y_ab),
                            };
                            let y = p.propagate_compact(y_mid, t_mid, st.end, &pulses, None)?;
                            let s = self.finish(y, st.end)?;
                            acc += combo.weight * s;
                        }
                    }
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Serial scan over a delay grid. The `vlevel` crate distributes rows.
    pub fn scan(&self, grid: &DelayGrid) -> Result<TimeDomainGrid> {
        grid.validate(self.prop.params())?;
        if grid.population_time != self.setup.population_time {
            return Err(Error::invalid("population_time", "grid and setup disagree"));
        }
        let mut values = Vec::with_capacity(grid.tau_axis.len() * grid.t_axis.len());
        for &tau in &grid.tau_axis {
            values.extend(self.row(tau, &grid.t_axis)?);
        }
        TimeDomainGrid::new(values, grid.clone(), self.excitation())
    }

    pub fn excitation(&self) -> Excitation {
        Excitation {
            areas: self.setup.areas,
            fwhm: self.setup.fwhm,
            duration: self.setup.duration,
            params: *self.prop.params(),
        }
    }

    /// Signal `S` for an isolated single pulse `A` with phase 0, read out at
    /// the same epoch a full train with these delays would use.
    pub fn single_pulse_signal(&self, delays: Delays) -> Result<f64> {
        let pulses = self.pulses(&[0.0; 4], delays)?;
        let end = self.prop.detection_time(&pulses);
        let only_a = [pulses[0]];
        let y = self
            .prop
            .propagate_compact(DensityMatrix::ground().to_compact(), self.prop.start_time(&only_a), end, &only_a, None)?;
        Ok(self.detect(&y))
    }
}
