//! Phase cycling: run a pulse train over a grid of pulse phases and combine
//! the detected signals with complex weights so that only the component with
//! a chosen phase signature survives.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseCycleScheme {
    /// Number of equally spaced phases per pulse; 1 keeps the phase at 0.
    pub steps: [usize; 4],
    /// Phase signature `(s1, s2, s3, s4)` of the extracted component.
    pub signature: [i32; 4],
}

impl Default for PhaseCycleScheme {
    /// 3×3×3×1 cycling for the rephasing signature `−φ1 + φ2 + φ3 − φ4`.
    fn default() -> Self {
        Self {
            steps: [3, 3, 3, 1],
            signature: [-1, 1, 1, -1],
        }
    }
}

/// One phase combination and its extraction weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCombo {
    pub index: [usize; 4],
    pub phases: [f64; 4],
    pub weight: Complex64,
}

impl PhaseCycleScheme {
    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            let n = self.steps[i];
            if n == 0 {
                return Err(Error::invalid("steps", format!("pulse {} has zero phase steps", i + 1)));
            }
            // an uncycled pulse carries phase 0; cycled ones must separate
            // the signed component from its neighbours
            if n > 1 && n < self.signature[i].unsigned_abs() as usize + 2 {
                return Err(Error::invalid(
                    "steps",
                    format!(
                        "pulse {} needs at least {} phase steps for signature {}",
                        i + 1,
                        self.signature[i].unsigned_abs() + 2,
                        self.signature[i]
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn combinations_count(&self) -> usize {
        self.steps.iter().product()
    }

    pub fn phase(&self, pulse: usize, k: usize) -> f64 {
        TAU * k as f64 / self.steps[pulse] as f64
    }

    /// All combinations in lexicographic order, pulse 1 slowest.
    pub fn combinations(&self) -> Vec<PhaseCombo> {
        let n = self.combinations_count() as f64;
        let mut out = Vec::with_capacity(self.combinations_count());
        for k1 in 0..self.steps[0] {
            for k2 in 0..self.steps[1] {
                for k3 in 0..self.steps[2] {
                    for k4 in 0..self.steps[3] {
                        let index = [k1, k2, k3, k4];
                        out.push(self.combo(index, n));
                    }
                }
            }
        }
        out
    }

    pub(crate) fn combo(&self, index: [usize; 4], n: f64) -> PhaseCombo {
        let phases = [
            self.phase(0, index[0]),
            self.phase(1, index[1]),
            self.phase(2, index[2]),
            self.phase(3, index[3]),
        ];
        PhaseCombo {
            index,
            phases,
            weight: self.weight(&phases) / n,
        }
    }

    /// `exp(−i Σ s_i φ_i)`.
    pub fn weight(&self, phases: &[f64; 4]) -> Complex64 {
        let arg: f64 = (0..4).map(|i| self.signature[i] as f64 * phases[i]).sum();
        Complex64::from_polar(1.0, -arg)
    }

    /// `(1/N) Σ S(φ)·exp(−i s·φ)` over all combinations for a real detector
    /// signal.
    pub fn extract<E>(
        &self,
        mut signal: impl FnMut(&[f64; 4]) -> core::result::Result<f64, E>,
    ) -> core::result::Result<Complex64, E> {
        self.extract_complex(|p| signal(p).map(|v| Complex64::new(v, 0.0)))
    }

    pub fn extract_complex<E>(
        &self,
        mut signal: impl FnMut(&[f64; 4]) -> core::result::Result<Complex64, E>,
    ) -> core::result::Result<Complex64, E> {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.combinations() {
            acc += c.weight * signal(&c.phases)?;
        }
        Ok(acc)
    }
}
