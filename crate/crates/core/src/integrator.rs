//! Adaptive Dormand–Prince 5(4) integrator for fixed-size real state vectors.

#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    /// Steps shorter than this abort the integration.
    pub min_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Scaled error norm: receives the state before and after a step and the
/// local error estimate, returns a value that must be ≤ 1 for acceptance.
pub trait ErrorNorm<const N: usize> {
    fn norm(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N], atol: f64, rtol: f64) -> f64;
}

/// Root-mean-square of per-component scaled errors.
pub struct RmsNorm;

impl<const N: usize> ErrorNorm<N> for RmsNorm {
    fn norm(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N], atol: f64, rtol: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`. `observe` is called after
/// every accepted step.
pub fn integrate<const N: usize, F, M, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    ctl: &StepControl,
    norm: &M,
    mut observe: O,
) -> Result<([f64; N], Stats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    M: ErrorNorm<N>,
    O: FnMut(f64, &[f64; N]),
{
    let mut stats = Stats::default();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok((y0, stats));
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = ctl.initial_step.min(ctl.max_step).min(span);
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;

    loop {
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if last { t1 } else { t + h };
        let k7 = f(t_new, &y_new);
        stats.rhs_evals += 6;

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = norm.norm(&y, &y_new, &err, ctl.abs_tol, ctl.rel_tol);

        if !e.is_finite() {
            return Err(Error::IntegrationFailure { time: t });
        }

        if e <= 1.0 {
            stats.accepted += 1;
            t = t_new;
            y = y_new;
            k1 = k7;
            observe(t, &y);
            if last {
                return Ok((y, stats));
            }
            let factor = if e == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h = (h * factor).min(ctl.max_step);
        } else {
            stats.rejected += 1;
            let factor = (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h *= factor;
        }
        if h < ctl.min_step {
            return Err(Error::IntegrationFailure { time: t });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> StepControl {
        StepControl {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_step: 1.0,
            initial_step: 1e-3,
            min_step: 1e-14,
        }
    }

    #[test]
    fn exponential_decay() {
        let (y, stats) = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, 3.0, [1.0], &ctl(), &RmsNorm, |_, _| {}).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let tau = 2.0 * core::f64::consts::PI;
        let (y, _) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            tau,
            [1.0, 0.0],
            &ctl(),
            &RmsNorm,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed steps: error ratio for h and h/2 should approach 2^5
        let run = |h: f64| {
            let c = StepControl {
                abs_tol: 1e6,
                rel_tol: 0.0,
                max_step: h,
                initial_step: h,
                min_step: 0.0,
            };
            let (y, _) = integrate(|t, y: &[f64; 1]| [y[0] * t.cos()], 0.0, 2.0, [1.0], &c, &RmsNorm, |_, _| {}).unwrap();
            (y[0] - 2f64.sin().exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 20.0 && ratio < 45.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_reports_failure() {
        let c = StepControl { min_step: 1e-6, ..ctl() };
        let r = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, 2.0, [1.0], &c, &RmsNorm, |_, _| {});
        match r {
            Err(Error::IntegrationFailure { time }) => assert!(time > 0.9 && time < 1.0001),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
