//! Extended optical Bloch equations for the V system, pulse-train field
//! synthesis, adaptive propagation and closed-form free evolution.
//!
//! The state is propagated in the frame rotating at the laser carrier `ωL`.
//! The real field is `E(t) = f(t)·e^{iωL t} + c.c.` with the complex envelope
//! `f(t) = Σ ½·E0·G(t)·e^{iφ}`, so the resonant coupling is
//! `⟨j|H|0⟩/ħ = −μ0j·f*(t)/ħ`.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, TAU};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::constants::HBAR;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::integrator::{self, ErrorNorm, StepControl};
use crate::model::{Pulse, PulseSequence, SystemParams};

/// Tolerance for the state checks after each propagation.
pub const INSTABILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldMode {
    /// Rotating-wave approximation in the frame of the laser carrier.
    RotatingWave,
    /// Keeps the counter-rotating terms for a carrier at `carrier` meV.
    FullField { carrier: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the step, fs. `None` uses a quarter of the narrowest
    /// active envelope.
    pub max_step: Option<f64>,
    /// Half-width of each pulse's integration window in units of its
    /// envelope FWHM.
    pub pulse_padding: f64,
    pub mode: FieldMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_step: None,
            pulse_padding: 3.0,
            mode: FieldMode::RotatingWave,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("abs_tol", "must be > 0"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol", "must be > 0"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::invalid("max_step", "must be > 0"));
            }
        }
        if !(self.pulse_padding >= 2.0 && self.pulse_padding.is_finite()) {
            return Err(Error::invalid("pulse_padding", "must be >= 2"));
        }
        if let FieldMode::FullField { carrier } = self.mode {
            if !(carrier > 0.0 && carrier.is_finite()) {
                return Err(Error::invalid("carrier", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Accepted integration points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    fn push(&mut self, t: f64, y: &[f64; 9]) {
        if self.times.last().map_or(true, |&last| t > last) {
            self.times.push(t);
            self.states.push(DensityMatrix::from_compact(y));
        }
    }
}

/// Relaxation and detuning constants in 1/fs.
#[derive(Debug, Clone, Copy)]
struct Rates {
    d1: f64,
    d2: f64,
    g01: f64,
    g02: f64,
    g12: f64,
    g1: f64,
    g2: f64,
    /// μ0j/ħ per unit field.
    k1: f64,
    k2: f64,
}

impl Rates {
    fn new(p: &SystemParams) -> Self {
        let (d1, d2) = p.detunings();
        Self {
            d1,
            d2,
            g01: p.rate(p.gamma01),
            g02: p.rate(p.gamma02),
            g12: p.rate(p.gamma12),
            g1: p.rate(p.gamma1),
            g2: p.rate(p.gamma2),
            k1: p.mu01 / HBAR,
            k2: p.mu02() / HBAR,
        }
    }
}

/// Derivative of the packed state for couplings `gj = ⟨j|H|0⟩/ħ`.
#[inline]
fn rhs_compact(y: &[f64; 9], g1: Complex64, g2: Complex64, r: &Rates) -> [f64; 9] {
    let (p0, p1, p2) = (y[0], y[1], y[2]);
    let c10 = Complex64::new(y[3], y[4]);
    let c20 = Complex64::new(y[5], y[6]);
    let c21 = Complex64::new(y[7], y[8]);
    let i = Complex64::i();

    let z1 = g1.conj() * c10;
    let z2 = g2.conj() * c20;

    let dp1 = -2.0 * z1.im - r.g1 * p1;
    let dp2 = -2.0 * z2.im - r.g2 * p2;
    let dp0 = -(dp1 + dp2);

    let dc10 = -i * (g1 * (p0 - p1) + c10 * r.d1 - c21.conj() * g2) - c10 * r.g01;
    let dc20 = -i * (g2 * (p0 - p2) + c20 * r.d2 - c21 * g1) - c20 * r.g02;
    let dc21 = -i * (g2 * c10.conj() + c21 * (r.d2 - r.d1) - c20 * g1.conj()) - c21 * r.g12;

    [dp0, dp1, dp2, dc10.re, dc10.im, dc20.re, dc20.im, dc21.re, dc21.im]
}

/// Error norm that treats each coherence as one complex number, so the step
/// sequence does not depend on the overall optical phase.
struct GaugeNorm;

impl ErrorNorm<9> for GaugeNorm {
    fn norm(&self, y0: &[f64; 9], y1: &[f64; 9], err: &[f64; 9], atol: f64, rtol: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        for i in [3, 5, 7] {
            let m0 = y0[i].hypot(y0[i + 1]);
            let m1 = y1[i].hypot(y1[i + 1]);
            let sc = atol + rtol * m0.max(m1);
            acc += (err[i] * err[i] + err[i + 1] * err[i + 1]) / (sc * sc);
        }
        (acc / 6.0).sqrt()
    }
}

/// Precomputed per-pulse field data.
#[derive(Debug, Clone, Copy)]
struct ActivePulse {
    center: f64,
    inv_w2: f64,
    /// ½·E0·e^{iφ}
    amp: Complex64,
    carrier: f64,
    lo: f64,
    hi: f64,
    width: f64,
}

impl ActivePulse {
    fn new(p: &Pulse, mu01: f64, padding: f64) -> Self {
        let w = p.envelope_fwhm();
        let (lo, hi) = p.support(padding);
        Self {
            center: p.center,
            inv_w2: 4.0 * LN_2 / (w * w),
            amp: Complex64::from_polar(0.5 * p.peak_field(mu01), p.phase),
            carrier: p.carrier_detuning / HBAR,
            lo,
            hi,
            width: w,
        }
    }

    #[inline]
    fn envelope(&self, t: f64) -> Complex64 {
        if t < self.lo || t > self.hi {
            return Complex64::new(0.0, 0.0);
        }
        let x = t - self.center;
        let g = (-self.inv_w2 * x * x).exp();
        if self.carrier == 0.0 {
            self.amp * g
        } else {
            self.amp * Complex64::from_polar(g, self.carrier * x)
        }
    }
}

#[inline]
fn envelope_sum(pulses: &[ActivePulse], t: f64) -> Complex64 {
    pulses.iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.envelope(t))
}

/// Field of a pulse train at time `t`.
///
/// In rotating-wave mode this is the complex envelope `f(t)` (meV per unit
/// dipole). In full-field mode it is the real field `f·e^{iωL t} + c.c.`
/// returned with zero imaginary part.
pub fn field_at(seq: &PulseSequence, t: f64, params: &SystemParams, opts: &SolverOptions) -> Complex64 {
    let active: Vec<ActivePulse> = seq
        .pulses()
        .iter()
        .map(|p| ActivePulse::new(p, params.mu01, opts.pulse_padding))
        .collect();
    let f = envelope_sum(&active, t);
    match opts.mode {
        FieldMode::RotatingWave => f,
        FieldMode::FullField { carrier } => {
            let wl = carrier / HBAR;
            Complex64::new(2.0 * (f * Complex64::from_polar(1.0, wl * t)).re, 0.0)
        }
    }
}

/// Time derivative of `rho` under the complex envelope `field` (rotating-wave
/// couplings), 1/fs.
pub fn obe_rhs(rho: &DensityMatrix, field: Complex64, params: &SystemParams) -> DensityMatrix {
    let r = Rates::new(params);
    let fc = field.conj();
    let d = rhs_compact(&rho.to_compact(), -fc * r.k1, -fc * r.k2, &r);
    DensityMatrix::from_compact(&d)
}

fn free_evolve_compact(y: &[f64; 9], dt: f64, r: &Rates) -> [f64; 9] {
    if dt == 0.0 {
        return *y;
    }
    let lost1 = -(-r.g1 * dt).exp_m1();
    let lost2 = -(-r.g2 * dt).exp_m1();
    let p1 = y[1] * (1.0 - lost1);
    let p2 = y[2] * (1.0 - lost2);
    let p0 = y[0] + y[1] * lost1 + y[2] * lost2;
    let rot = |re: f64, im: f64, w: f64, g: f64| {
        let z = Complex64::new(re, im) * Complex64::from_polar((-g * dt).exp(), -w * dt);
        (z.re, z.im)
    };
    let (a, b) = rot(y[3], y[4], r.d1, r.g01);
    let (c, d) = rot(y[5], y[6], r.d2, r.g02);
    let (e, f) = rot(y[7], y[8], r.d2 - r.d1, r.g12);
    [p0, p1, p2, a, b, c, d, e, f]
}

/// Exact field-free evolution over `dt` fs.
pub fn free_evolve(rho: &DensityMatrix, dt: f64, params: &SystemParams) -> DensityMatrix {
    DensityMatrix::from_compact(&free_evolve_compact(&rho.to_compact(), dt, &Rates::new(params)))
}

/// Propagates density matrices through (parts of) pulse trains.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: SystemParams,
    opts: SolverOptions,
    rates: Rates,
}

impl Propagator {
    pub fn new(params: SystemParams, opts: SolverOptions) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        Ok(Self {
            rates: Rates::new(&params),
            params,
            opts,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// Start of the first pulse window.
    pub fn start_time(&self, pulses: &[Pulse]) -> f64 {
        pulses
            .iter()
            .map(|p| p.support(self.opts.pulse_padding).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// End of the last pulse window; "after the pulses" readouts happen here.
    pub fn detection_time(&self, pulses: &[Pulse]) -> f64 {
        pulses
            .iter()
            .map(|p| p.support(self.opts.pulse_padding).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Propagates `rho` from `t_from` to `t_to` under the pulses whose
    /// windows intersect that interval. Gaps without field use
    /// [`free_evolve`].
    pub fn propagate(
        &self,
        rho: &DensityMatrix,
        t_from: f64,
        t_to: f64,
        pulses: &[Pulse],
        trajectory: Option<&mut Trajectory>,
    ) -> Result<DensityMatrix> {
        let y = self.propagate_compact(rho.to_compact(), t_from, t_to, pulses, trajectory)?;
        let out = DensityMatrix::from_compact(&y);
        out.check(INSTABILITY_TOL, t_to)?;
        Ok(out)
    }

    pub(crate) fn propagate_compact(
        &self,
        mut y: [f64; 9],
        t_from: f64,
        t_to: f64,
        pulses: &[Pulse],
        mut trajectory: Option<&mut Trajectory>,
    ) -> Result<[f64; 9]> {
        if t_to < t_from {
            return Err(Error::invalid("t_to", "must not precede t_from"));
        }
        let pad = self.opts.pulse_padding;
        let mut active: Vec<ActivePulse> = pulses
            .iter()
            .filter(|p| p.area > 0.0)
            .map(|p| ActivePulse::new(p, self.params.mu01, pad))
            .filter(|p| p.hi > t_from && p.lo < t_to)
            .collect();
        active.sort_by(|a, b| a.lo.total_cmp(&b.lo));

        if let Some(tr) = trajectory.as_deref_mut() {
            tr.push(t_from, &y);
        }
        let mut t = t_from;
        let mut i = 0;
        while i < active.len() {
            let seg_lo = active[i].lo.max(t_from);
            let mut seg_hi = active[i].hi;
            let mut j = i + 1;
            while j < active.len() && active[j].lo <= seg_hi {
                seg_hi = seg_hi.max(active[j].hi);
                j += 1;
            }
            let seg_hi = seg_hi.min(t_to);
            if seg_lo > t {
                y = free_evolve_compact(&y, seg_lo - t, &self.rates);
                t = seg_lo;
                if let Some(tr) = trajectory.as_deref_mut() {
                    tr.push(t, &y);
                }
            }
            y = self.integrate_segment(y, t, seg_hi, &active[i..j], trajectory.as_deref_mut())?;
            t = seg_hi;
            i = j;
        }
        if t_to > t {
            y = free_evolve_compact(&y, t_to - t, &self.rates);
            if let Some(tr) = trajectory.as_deref_mut() {
                tr.push(t_to, &y);
            }
        }
        Ok(y)
    }

    fn integrate_segment(
        &self,
        y: [f64; 9],
        t0: f64,
        t1: f64,
        pulses: &[ActivePulse],
        mut trajectory: Option<&mut Trajectory>,
    ) -> Result<[f64; 9]> {
        let w_min = pulses.iter().map(|p| p.width).fold(f64::INFINITY, f64::min);
        let mut max_step = self.opts.max_step.unwrap_or(0.25 * w_min);
        let r = &self.rates;
        let ctl_for = |max_step: f64| StepControl {
            abs_tol: self.opts.abs_tol,
            rel_tol: self.opts.rel_tol,
            max_step,
            initial_step: (0.01 * w_min).min(max_step),
            min_step: 1e-9 * w_min.min(1.0),
        };
        let observe = |t: f64, y: &[f64; 9]| {
            if let Some(tr) = trajectory.as_deref_mut() {
                tr.push(t, y);
            }
        };
        let (y, _stats) = match self.opts.mode {
            FieldMode::RotatingWave => integrator::integrate(
                |t, y: &[f64; 9]| {
                    let fc = envelope_sum(pulses, t).conj();
                    rhs_compact(y, -fc * r.k1, -fc * r.k2, r)
                },
                t0,
                t1,
                y,
                &ctl_for(max_step),
                &GaugeNorm,
                observe,
            )?,
            FieldMode::FullField { carrier } => {
                let wl = carrier / HBAR;
                max_step = max_step.min(TAU / wl / 16.0);
                integrator::integrate(
                    |t, y: &[f64; 9]| {
                        let phase = Complex64::from_polar(1.0, wl * t);
                        let e = 2.0 * (envelope_sum(pulses, t) * phase).re;
                        let g = -phase * e;
                        rhs_compact(y, g * r.k1, g * r.k2, r)
                    },
                    t0,
                    t1,
                    y,
                    &ctl_for(max_step),
                    &GaugeNorm,
                    observe,
                )?
            }
        };
        Ok(y)
    }

    /// Integrates a whole sequence from the start of its first pulse window to
    /// `t_end`, starting from `rho0`.
    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        seq: &PulseSequence,
        t_end: f64,
        trajectory: Option<&mut Trajectory>,
    ) -> Result<DensityMatrix> {
        let start = self.start_time(seq.pulses());
        if t_end <= start {
            return Ok(*rho0);
        }
        self.propagate(rho0, start, t_end, seq.pulses(), trajectory)
    }
}

/// Integrates `seq` from the opening of its first pulse window to `t_end`.
pub fn evolve(
    rho0: &DensityMatrix,
    seq: &PulseSequence,
    t_end: f64,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<DensityMatrix> {
    Propagator::new(*params, *opts)?.evolve(rho0, seq, t_end, None)
}
