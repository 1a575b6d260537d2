//! System and pulse descriptors plus the closed-form scalar relations shared
//! by the rest of the crate.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI, TAU};
#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::constants::{HBAR, PLANCK};
use crate::error::{Error, Result};

/// How a rate quoted in meV becomes a rate in 1/fs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateConvention {
    /// `γ/ħ`: the meV value is an angular-frequency energy.
    Angular,
    /// `γ/h`: the meV value is a cyclic-frequency energy.
    #[default]
    Cyclic,
}

impl RateConvention {
    pub fn to_per_fs(self, rate_mev: f64) -> f64 {
        match self {
            RateConvention::Angular => rate_mev / HBAR,
            RateConvention::Cyclic => rate_mev / PLANCK,
        }
    }
}

/// V-type system parameters. Defaults reproduce the potassium-like D1/D2
/// model: Δ = 7 meV, γ01 = γ02 = 0.193 meV, γ12 = γ1 = γ2 = 0.386 meV,
/// μ02/μ01 = 1.4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Excited-state splitting Δ, meV.
    pub delta: f64,
    pub gamma01: f64,
    pub gamma02: f64,
    pub gamma12: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu01: f64,
    /// μ02/μ01.
    pub mu_ratio: f64,
    /// ω01 − ωL expressed as an energy, meV.
    pub laser_detuning1: f64,
    pub rate_convention: RateConvention,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            delta: 7.0,
            gamma01: 0.193,
            gamma02: 0.193,
            gamma12: 0.386,
            gamma1: 0.386,
            gamma2: 0.386,
            mu01: 1.0,
            mu_ratio: 1.4,
            laser_detuning1: 0.0,
            rate_convention: RateConvention::default(),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma01", self.gamma01),
            ("gamma02", self.gamma02),
            ("gamma12", self.gamma12),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.mu01 > 0.0 && self.mu01.is_finite()) {
            return Err(Error::invalid("mu01", format!("must be > 0, got {}", self.mu01)));
        }
        if !(self.mu_ratio >= 0.0 && self.mu_ratio.is_finite()) {
            return Err(Error::invalid("mu_ratio", format!("must be >= 0, got {}", self.mu_ratio)));
        }
        if !self.laser_detuning1.is_finite() {
            return Err(Error::invalid("laser_detuning1", "must be finite"));
        }
        Ok(())
    }

    pub fn mu02(&self) -> f64 {
        self.mu01 * self.mu_ratio
    }

    pub fn mu_eff(&self) -> f64 {
        effective_dipole(self.mu01, self.mu02())
    }

    /// Rotating-frame detunings of `|1⟩` and `|2⟩` from the laser carrier, rad/fs.
    pub fn detunings(&self) -> (f64, f64) {
        (
            self.laser_detuning1 / HBAR,
            (self.laser_detuning1 + self.delta) / HBAR,
        )
    }

    pub(crate) fn rate(&self, gamma_mev: f64) -> f64 {
        self.rate_convention.to_per_fs(gamma_mev)
    }
}

/// What the `fwhm` number of a [`Pulse`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DurationConvention {
    /// FWHM of the intensity profile `G(t)²`.
    IntensityFwhm,
    /// FWHM of the field envelope `G(t)` itself.
    FieldFwhm,
    /// Half width at half maximum of `G(t)`; the envelope FWHM is twice the
    /// quoted number.
    #[default]
    FieldHwhm,
}

impl DurationConvention {
    /// Ratio between the field-envelope FWHM and the quoted duration.
    pub fn envelope_factor(self) -> f64 {
        match self {
            DurationConvention::IntensityFwhm => core::f64::consts::SQRT_2,
            DurationConvention::FieldFwhm => 1.0,
            DurationConvention::FieldHwhm => 2.0,
        }
    }
}

/// A Gaussian pulse. The area is defined with respect to μ01.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    /// Pulse area Θ, rad.
    pub area: f64,
    /// Quoted duration, fs. See [`DurationConvention`].
    pub fwhm: f64,
    /// Arrival time of the envelope maximum, fs.
    pub center: f64,
    /// Carrier-envelope phase at the envelope maximum, rad, in `[0, 2π)`.
    pub phase: f64,
    /// Offset of the pulse carrier from the laser reference frequency, meV.
    pub carrier_detuning: f64,
    pub duration: DurationConvention,
}

impl Pulse {
    pub fn new(area: f64, fwhm: f64, center: f64, phase: f64) -> Result<Self> {
        Self::with_convention(area, fwhm, center, phase, DurationConvention::default())
    }

    pub fn with_convention(
        area: f64,
        fwhm: f64,
        center: f64,
        phase: f64,
        duration: DurationConvention,
    ) -> Result<Self> {
        if !(fwhm > 0.0 && fwhm.is_finite()) {
            return Err(Error::invalid("fwhm", format!("must be > 0, got {fwhm}")));
        }
        if !(area >= 0.0 && area.is_finite()) {
            return Err(Error::invalid("area", format!("must be >= 0, got {area}")));
        }
        if !center.is_finite() || !phase.is_finite() {
            return Err(Error::invalid("center", "center and phase must be finite"));
        }
        Ok(Self {
            area,
            fwhm,
            center,
            phase: normalize_phase(phase),
            carrier_detuning: 0.0,
            duration,
        })
    }

    pub fn with_carrier_detuning(mut self, detuning_mev: f64) -> Self {
        self.carrier_detuning = detuning_mev;
        self
    }

    /// FWHM of the field envelope `G(t)`, fs.
    pub fn envelope_fwhm(&self) -> f64 {
        self.fwhm * self.duration.envelope_factor()
    }

    /// Normalised envelope `G(t)`, equal to 1 at the centre.
    pub fn envelope(&self, t: f64) -> f64 {
        let w = self.envelope_fwhm();
        let x = (t - self.center) / w;
        (-4.0 * LN_2 * x * x).exp()
    }

    /// Peak envelope amplitude E0 (meV per unit dipole) for this pulse's area.
    pub fn peak_field(&self, mu01: f64) -> f64 {
        // mu01 and fwhm are validated at construction of params and pulse
        peak_field_from_area(self.area, mu01, self.envelope_fwhm()).unwrap_or(0.0)
    }

    /// Integration window `center ± padding·envelope_fwhm`.
    pub fn support(&self, padding: f64) -> (f64, f64) {
        let half = padding * self.envelope_fwhm();
        (self.center - half, self.center + half)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = num_traits::Euclid::rem_euclid(&phase, &TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// An ordered pulse train. In four-pulse experiments the pulses are
/// A*, B, C, D*, with A* and D* entering conjugated.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
    conjugated: Vec<bool>,
}

impl PulseSequence {
    pub fn new(pulses: Vec<Pulse>) -> Result<Self> {
        let n = pulses.len();
        let conjugated = if n == 4 {
            alloc::vec![true, false, false, true]
        } else {
            alloc::vec![false; n]
        };
        Self::with_conjugation(pulses, conjugated)
    }

    pub fn single(pulse: Pulse) -> Self {
        Self {
            pulses: alloc::vec![pulse],
            conjugated: alloc::vec![false],
        }
    }

    pub fn with_conjugation(pulses: Vec<Pulse>, conjugated: Vec<bool>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::invalid("pulses", "sequence is empty"));
        }
        if conjugated.len() != pulses.len() {
            return Err(Error::invalid("conjugated", "one flag per pulse required"));
        }
        if pulses.windows(2).any(|w| w[1].center < w[0].center) {
            return Err(Error::invalid("pulses", "pulse centers must be nondecreasing"));
        }
        Ok(Self { pulses, conjugated })
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn conjugated(&self) -> &[bool] {
        &self.conjugated
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }
}

/// `μeff = √(μ01² + μ02²)`.
pub fn effective_dipole(mu01: f64, mu02: f64) -> f64 {
    mu01.hypot(mu02)
}

/// Generalized Rabi frequency `√(Δω² + (μE0/ħ)²)`, rad/fs.
pub fn generalized_rabi_frequency(detuning: f64, mu: f64, field_amplitude: f64) -> f64 {
    detuning.hypot(mu * field_amplitude / HBAR)
}

/// Relative phase, in cycles, that two states split by `delta` (meV) accrue
/// over `fwhm` (fs).
pub fn tau_delta_product(fwhm: f64, delta: f64) -> f64 {
    fwhm * delta / PLANCK
}

/// Peak amplitude `E0` of `G(t) = exp(−4 ln2 (t−t0)²/fwhm²)` such that
/// `(μ01/ħ)∫E0·G dt = area`.
pub fn peak_field_from_area(area: f64, mu01: f64, fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) {
        return Err(Error::invalid("fwhm", format!("must be > 0, got {fwhm}")));
    }
    if !(mu01 > 0.0) {
        return Err(Error::invalid("mu01", format!("must be > 0, got {mu01}")));
    }
    Ok(area * HBAR / (mu01 * fwhm) * (4.0 * LN_2 / PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn table_defaults() {
        let p = SystemParams::default();
        assert_eq!(p.gamma01, 0.193);
        assert_eq!(p.gamma02, 0.193);
        assert_eq!(p.gamma12, 0.386);
        assert_eq!(p.gamma1, 0.386);
        assert_eq!(p.gamma2, 0.386);
        assert_eq!(p.delta, 7.0);
        assert_eq!(p.mu_ratio, 1.4);
        p.validate().unwrap();
    }

    #[test]
    fn params_rejected() {
        let mut p = SystemParams::default();
        p.delta = 0.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.gamma12 = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "gamma12", .. })));
    }

    #[test]
    fn effective_dipole_examples() {
        assert!(close(effective_dipole(1.0, 1.4), 1.7205, 5e-5));
        assert_eq!(effective_dipole(1.0, 0.0), 1.0);
        assert!(close(effective_dipole(3.0, 4.0), 5.0, 1e-15));
    }

    #[test]
    fn rabi_frequency_examples() {
        let e0 = 2.0;
        assert!(close(generalized_rabi_frequency(0.0, 1.5, e0), 1.5 * e0 / HBAR, 1e-18));
        assert!(close(generalized_rabi_frequency(-3e-3, 1.0, 0.0), 3e-3, 1e-18));
        let e = 4e-3 * HBAR;
        assert!(close(generalized_rabi_frequency(3e-3, 1.0, e), 5e-3, 1e-15));
    }

    #[test]
    fn tau_delta_examples() {
        assert!(close(tau_delta_product(10.0, 7.0), 0.017, 5e-4));
        assert!(close(tau_delta_product(85.0, 7.0), 0.144, 5e-4));
        // 85 fs × 25 meV is 0.5138 cycles; the quoted 0.510 is rounded loosely
        assert!(close(tau_delta_product(85.0, 25.0), 0.510, 5e-3));
        assert!(close(tau_delta_product(85.0, 0.82), 0.017, 5e-4));
    }

    #[test]
    fn peak_field_scaling() {
        assert_eq!(peak_field_from_area(0.0, 1.0, 85.0).unwrap(), 0.0);
        let a = peak_field_from_area(PI, 1.0, 40.0).unwrap();
        let b = peak_field_from_area(PI, 1.0, 80.0).unwrap();
        assert!(close(a, 2.0 * b, 1e-12 * a));
        assert!(peak_field_from_area(PI, 1.0, 0.0).is_err());
        assert!(peak_field_from_area(PI, 0.0, 10.0).is_err());
    }

    #[test]
    fn pulse_validation_and_phase_wrap() {
        assert!(Pulse::new(PI, -1.0, 0.0, 0.0).is_err());
        assert!(Pulse::new(-0.1, 10.0, 0.0, 0.0).is_err());
        let p = Pulse::new(PI, 10.0, 0.0, 2.0 * PI + 0.5).unwrap();
        assert!(close(p.phase, 0.5, 1e-12));
        let p = Pulse::new(PI, 10.0, 0.0, -0.5).unwrap();
        assert!(p.phase >= 0.0 && p.phase < TAU);
    }

    #[test]
    fn sequence_ordering() {
        let a = Pulse::new(0.1, 10.0, 0.0, 0.0).unwrap();
        let b = Pulse::new(0.1, 10.0, -5.0, 0.0).unwrap();
        assert!(PulseSequence::new(alloc::vec![a, b]).is_err());
        let s = PulseSequence::new(alloc::vec![b, a, a, a]).unwrap();
        assert_eq!(s.conjugated(), &[true, false, false, true]);
    }
}
