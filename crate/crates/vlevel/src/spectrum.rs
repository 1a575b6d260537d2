//! Time-domain grid to 2D spectrum.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use vlevel_core::twodcs::{axis_step, Spectrum2D, TimeDomainGrid};
use vlevel_core::{Error, PLANCK};

/// Apodisation applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Window {
    #[default]
    None,
    /// `exp(−rate·(τ + t))`, rate in 1/fs.
    Exponential { rate: f64 },
}

/// Frequency axis in meV for `n` bins of spacing `step` fs, ascending, zero at
/// index `n/2`.
pub fn frequency_axis(n: usize, step: f64) -> Vec<f64> {
    let de = PLANCK / (n as f64 * step);
    (0..n).map(|k| (k as f64 - (n / 2) as f64) * de).collect()
}

/// Rephasing spectrum of `grid`.
///
/// Both axes use the forward transform `Σ x·e^{−iωt}`. A component
/// `e^{−iω_a τ}·e^{+iω_e t}` then lands at `(−ħω_a, +ħω_e)`, so absorption
/// detunings appear negated. Both axes are zero-padded to
/// `zero_pad_factor × n`.
pub fn spectrum_2d(grid: &TimeDomainGrid, zero_pad_factor: usize, window: Window) -> Result<Spectrum2D, Error> {
    if zero_pad_factor == 0 {
        return Err(Error::InvalidParameter {
            name: "zero_pad_factor",
            reason: "must be >= 1".into(),
        });
    }
    let tau = &grid.axes.tau_axis;
    let t = &grid.axes.t_axis;
    let step_tau = axis_step("tau_axis", tau)?.ok_or(Error::NonUniformAxis("tau_axis"))?;
    let step_t = axis_step("t_axis", t)?.ok_or(Error::NonUniformAxis("t_axis"))?;
    if let Window::Exponential { rate } = window {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "window_rate",
                reason: format!("must be finite and >= 0, got {rate}"),
            });
        }
    }
    let (n, m) = grid.shape();
    let (np, mp) = (n * zero_pad_factor, m * zero_pad_factor);
    let mut buf = vec![Complex64::new(0.0, 0.0); np * mp];
    for i in 0..n {
        for j in 0..m {
            let w = match window {
                Window::None => 1.0,
                Window::Exponential { rate } => (-rate * (tau[i] + t[j])).exp(),
            };
            buf[i * mp + j] = grid.at(i, j) * w;
        }
    }

    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(mp);
    for row in buf.chunks_exact_mut(mp) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(np);
    let mut col = vec![Complex64::new(0.0, 0.0); np];
    for j in 0..mp {
        for i in 0..np {
            col[i] = buf[i * mp + j];
        }
        col_fft.process(&mut col);
        for i in 0..np {
            buf[i * mp + j] = col[i];
        }
    }

    // fftshift on both axes
    let mut values = vec![Complex64::new(0.0, 0.0); np * mp];
    for i in 0..np {
        let si = (i + np - np / 2) % np;
        for j in 0..mp {
            let sj = (j + mp - mp / 2) % mp;
            values[i * mp + j] = buf[si * mp + sj];
        }
    }
    let mut spec = Spectrum2D::new(values, frequency_axis(np, step_tau), frequency_axis(mp, step_t))?;
    spec.excitation = Some(grid.excitation);
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vlevel_core::twodcs::{DelayGrid, Excitation};
    use vlevel_core::{DurationConvention, SystemParams, HBAR};

    fn tone(n: usize, step: f64, e_tau: f64, e_t: f64) -> TimeDomainGrid {
        let axes = DelayGrid::square(n, step, 200.0);
        let mut v = Vec::new();
        for &tau in &axes.tau_axis {
            for &t in &axes.t_axis {
                v.push(Complex64::from_polar(1.0, -e_tau / HBAR * tau + e_t / HBAR * t));
            }
        }
        let excitation = Excitation {
            areas: [0.0; 4],
            fwhm: 85.0,
            duration: DurationConvention::default(),
            params: SystemParams::default(),
        };
        TimeDomainGrid::new(v, axes, excitation).unwrap()
    }

    fn argmax(s: &Spectrum2D) -> (f64, f64) {
        let (n, m) = s.shape();
        let mut best = (0, 0);
        for i in 0..n {
            for j in 0..m {
                if s.at(i, j).norm() > s.at(best.0, best.1).norm() {
                    best = (i, j);
                }
            }
        }
        (s.omega_tau_axis[best.0], s.omega_t_axis[best.1])
    }

    #[test]
    fn emission_tone_lands_at_plus_delta() {
        let s = spectrum_2d(&tone(64, 40.0, 0.0, 7.0), 2, Window::None).unwrap();
        let bin = PLANCK / (64.0 * 40.0);
        let (a, b) = argmax(&s);
        assert!(a.abs() <= bin && (b - 7.0).abs() <= bin, "{a} {b}");
    }

    #[test]
    fn absorption_tone_lands_negated() {
        let s = spectrum_2d(&tone(64, 40.0, 7.0, 0.0), 1, Window::None).unwrap();
        let bin = PLANCK / (64.0 * 40.0);
        let (a, b) = argmax(&s);
        assert!((a + 7.0).abs() <= bin && b.abs() <= bin, "{a} {b}");
    }

    #[test]
    fn padding_moves_peak_less_than_half_bin() {
        let g = tone(64, 40.0, 6.1, 3.3);
        let bin = PLANCK / (64.0 * 40.0);
        let (a1, b1) = argmax(&spectrum_2d(&g, 1, Window::None).unwrap());
        let (a4, b4) = argmax(&spectrum_2d(&g, 4, Window::None).unwrap());
        assert!((a1 - a4).abs() < 0.5 * bin && (b1 - b4).abs() < 0.5 * bin);
    }

    #[test]
    fn frequency_axis_is_centred() {
        let ax = frequency_axis(8, 40.0);
        assert_eq!(ax[4], 0.0);
        assert!((ax[5] - PLANCK / 320.0).abs() < 1e-12);
    }
}
