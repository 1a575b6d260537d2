use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use vlevel_core::analysis::{locate_peaks, visibility_from_amplitudes, wrap_phase, PeakLabel};
use vlevel_core::model::{effective_dipole, peak_field_from_area, tau_delta_product};
use vlevel_core::phase_cycle::PhaseCycleScheme;
use vlevel_core::twodcs::{Delays, RephasingEngine, RephasingSetup, Spectrum2D};
use vlevel_core::{
    free_evolve, Complex64, DensityMatrix, Propagator, Pulse, PulseSequence, SolverOptions, SystemParams,
    HBAR,
};

fn random_state() -> impl Strategy<Value = DensityMatrix> {
    (prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(-1.0f64..1.0), 0.0f64..1.0).prop_map(
        |(re, im, mix)| {
            let psi: Vec<Complex64> = (0..3).map(|i| Complex64::new(re[i], im[i])).collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
            let pure = DensityMatrix::pure([psi[0] / norm, psi[1] / norm, psi[2] / norm]);
            // convex mix with the ground state stays a valid density matrix
            let g = DensityMatrix::ground();
            let mut out = DensityMatrix::zeros();
            for j in 0..3 {
                for k in 0..3 {
                    out.rho[j][k] = pure.rho[j][k] * mix + g.rho[j][k] * (1.0 - mix);
                }
            }
            out
        },
    )
}

fn pulse_train() -> impl Strategy<Value = Vec<Pulse>> {
    prop::collection::vec((0.0f64..3.0 * PI, 5.0f64..60.0, 0.0f64..150.0, 0.0f64..TAU), 1..=4).prop_map(
        |specs| {
            let mut center = 0.0;
            specs
                .into_iter()
                .map(|(area, fwhm, gap, phase)| {
                    center += gap;
                    Pulse::new(area, fwhm, center, phase).unwrap()
                })
                .collect()
        },
    )
}

/// Adaptive Simpson quadrature, independent of the closed-form area relation.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pulse_trains_preserve_density_matrix(pulses in pulse_train()) {
        let prop = Propagator::new(SystemParams::default(), SolverOptions::default()).unwrap();
        let seq = PulseSequence::with_conjugation(pulses.clone(), vec![false; pulses.len()]).unwrap();
        let end = prop.detection_time(&pulses) + 50.0;
        let rho = prop.evolve(&DensityMatrix::ground(), &seq, end, None).unwrap();
        prop_assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        prop_assert!(rho.hermiticity_error() < 1e-10);
        prop_assert!(rho.min_eigenvalue() > -1e-7);
    }

    #[test]
    fn free_evolution_is_a_semigroup(rho in random_state(), a in 0.0f64..2000.0, b in 0.0f64..2000.0) {
        let p = SystemParams::default();
        let two_steps = free_evolve(&free_evolve(&rho, a, &p), b, &p);
        let one_step = free_evolve(&rho, a + b, &p);
        prop_assert!(two_steps.max_abs_diff(&one_step) < 1e-12);
    }

    #[test]
    fn visibility_is_scale_invariant(amps in prop::array::uniform4(0.0f64..10.0), k in 1e-6f64..1e6) {
        prop_assume!(amps.iter().any(|a| *a > 1e-3));
        let pv = visibility_from_amplitudes(amps).unwrap();
        let scaled = visibility_from_amplitudes(amps.map(|a| a * k)).unwrap();
        prop_assert!((pv.iter().sum::<f64>() - 100.0).abs() < 1e-10);
        for i in 0..4 {
            prop_assert!((pv[i] - scaled[i]).abs() < 1e-10);
            prop_assert!(pv[i] >= 0.0);
        }
    }

    #[test]
    fn tau_delta_is_bilinear(w in 1.0f64..500.0, d in 0.1f64..50.0, k in 0.1f64..10.0) {
        let base = tau_delta_product(w, d);
        prop_assert!((tau_delta_product(k * w, d) - k * base).abs() <= 1e-12 * k * base);
        prop_assert!((tau_delta_product(w, k * d) - k * base).abs() <= 1e-12 * k * base);
    }

    #[test]
    fn effective_dipole_is_symmetric(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let m = effective_dipole(a, b);
        prop_assert_eq!(m, effective_dipole(b, a));
        prop_assert!(m >= a.max(b));
        prop_assert!((m * m - a * a - b * b).abs() < 1e-12 * (1.0 + m * m));
    }

    #[test]
    fn peak_field_integrates_to_area(theta in 0.01 * PI..10.0 * PI, fwhm in 1.0f64..300.0, mu in 0.1f64..5.0) {
        let pulse = Pulse::new(theta, fwhm, 0.0, 0.0).unwrap();
        let e0 = pulse.peak_field(mu);
        prop_assert_eq!(e0, peak_field_from_area(theta, mu, pulse.envelope_fwhm()).unwrap());
        let half = 12.0 * pulse.envelope_fwhm();
        let area = simpson(&|t| mu * e0 * pulse.envelope(t) / HBAR, -half, half, 1e-13);
        prop_assert!((area - theta).abs() < 1e-8 * theta.max(1.0), "{area} vs {theta}");
    }

    #[test]
    fn phase_cycling_is_orthogonal(amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 27)) {
        let scheme = PhaseCycleScheme::default();
        let mut idx = 0;
        let mut components = Vec::new();
        for a in -1i32..=1 {
            for b in -1i32..=1 {
                for c in -1i32..=1 {
                    components.push(([a, b, c], Complex64::new(amps[idx].0, amps[idx].1)));
                    idx += 1;
                }
            }
        }
        let got = scheme
            .extract_complex(|p| {
                let s: Complex64 = components
                    .iter()
                    .map(|(s, z)| z * Complex64::from_polar(1.0, s[0] as f64 * p[0] + s[1] as f64 * p[1] + s[2] as f64 * p[2]))
                    .sum();
                Ok::<_, ()>(s)
            })
            .unwrap();
        let want = components.iter().find(|(s, _)| *s == [-1, 1, 1]).unwrap().1;
        prop_assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn peak_finder_follows_blobs(offsets in prop::array::uniform4((-3i32..=3, -3i32..=3)), heights in prop::array::uniform4(0.1f64..5.0)) {
        let (spec, targets) = blob_spectrum(&offsets, &heights, Complex64::new(1.0, 0.0));
        let peaks = locate_peaks(&spec, &SystemParams::default(), None).unwrap();
        for label in PeakLabel::ALL {
            let r = &peaks[label.index()];
            prop_assert_eq!(r.found_index, targets[label.index()]);
            prop_assert!((r.max_amplitude - heights[label.index()]).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_phase_is_gauge_covariant(offsets in prop::array::uniform4((-3i32..=3, -3i32..=3)), alpha in -PI..PI) {
        let heights = [1.0, 2.0, 3.0, 4.0];
        let (spec, _) = blob_spectrum(&offsets, &heights, Complex64::new(1.0, 0.0));
        let (rot, _) = blob_spectrum(&offsets, &heights, Complex64::from_polar(1.0, alpha));
        let p = SystemParams::default();
        let a = locate_peaks(&spec, &p, None).unwrap();
        let b = locate_peaks(&rot, &p, None).unwrap();
        for i in 0..4 {
            prop_assert_eq!(a[i].found_index, b[i].found_index);
            prop_assert!(wrap_phase(b[i].phase_at_max - a[i].phase_at_max - alpha).abs() < 1e-12);
        }
    }
}

/// Spectrum on a 0.25 meV grid with one sharp peak near each expected centre,
/// displaced by `offsets` bins. Returns the target bin of each peak.
fn blob_spectrum(offsets: &[(i32, i32); 4], heights: &[f64; 4], gauge: Complex64) -> (Spectrum2D, [(usize, usize); 4]) {
    let n = 96;
    let axis: Vec<f64> = (0..n).map(|i| (i as f64 - 48.0) * 0.25).collect();
    let delta = SystemParams::default().delta;
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let mut targets = [(0, 0); 4];
    for label in PeakLabel::ALL {
        let (ct, cw) = label.expected_center(delta);
        let i = (48.0 + ct / 0.25) as i32 + offsets[label.index()].0;
        let j = (48.0 + cw / 0.25) as i32 + offsets[label.index()].1;
        let (i, j) = (i as usize, j as usize);
        targets[label.index()] = (i, j);
        let h = heights[label.index()];
        let phase = Complex64::from_polar(1.0, 0.3 * label.index() as f64);
        for (di, dj, w) in [(0i32, 0i32, 1.0), (1, 0, 0.3), (-1, 0, 0.3), (0, 1, 0.3), (0, -1, 0.3)] {
            let (a, b) = ((i as i32 + di) as usize, (j as i32 + dj) as usize);
            values[a * n + b] = gauge * phase * (h * w);
        }
    }
    (Spectrum2D::new(values, axis.clone(), axis).unwrap(), targets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn common_phase_offset_leaves_signal_unchanged(
        phases in prop::array::uniform4(0.0f64..TAU),
        offset in 0.0f64..TAU,
        tau in 0.0f64..200.0,
        t in 0.0f64..200.0,
    ) {
        let prop = Propagator::new(SystemParams::default(), SolverOptions::default()).unwrap();
        let setup = RephasingSetup::new([0.9 * PI, 0.9 * PI, 0.9 * PI, 0.3 * PI], 20.0, 60.0);
        let engine = RephasingEngine::new(&prop, setup).unwrap();
        let delays = Delays { tau, population_time: 60.0, t };
        let base = engine.run_sequence(&phases, delays).unwrap();
        let shifted = engine.run_sequence(&phases.map(|p| p + offset), delays).unwrap();
        prop_assert!((base - shifted).abs() < 1e-10, "{base} vs {shifted}");
    }
}
