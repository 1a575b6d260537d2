//! 3×3 density matrix over the basis `{|0⟩, |1⟩, |2⟩}`.

use core::f64::consts::PI;
use core::ops::{Index, IndexMut};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in std builds
use num_traits::Float;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `rho[j][k] = ⟨j|ρ|k⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub rho: [[Complex64; 3]; 3],
}

impl Default for DensityMatrix {
    fn default() -> Self {
        Self::ground()
    }
}

impl Index<(usize, usize)> for DensityMatrix {
    type Output = Complex64;
    fn index(&self, (j, k): (usize, usize)) -> &Complex64 {
        &self.rho[j][k]
    }
}

impl IndexMut<(usize, usize)> for DensityMatrix {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut Complex64 {
        &mut self.rho[j][k]
    }
}

impl DensityMatrix {
    pub fn zeros() -> Self {
        Self { rho: [[ZERO; 3]; 3] }
    }

    pub fn ground() -> Self {
        Self::excited(0)
    }

    /// Pure population in state `j`.
    pub fn excited(j: usize) -> Self {
        let mut m = Self::zeros();
        m.rho[j][j] = Complex64::new(1.0, 0.0);
        m
    }

    /// `|ψ⟩⟨ψ|` for a normalised amplitude vector.
    pub fn pure(psi: [Complex64; 3]) -> Self {
        let mut m = Self::zeros();
        for j in 0..3 {
            for k in 0..3 {
                m.rho[j][k] = psi[j] * psi[k].conj();
            }
        }
        m
    }

    pub fn population(&self, j: usize) -> f64 {
        self.rho[j][j].re
    }

    /// `|ρjk|`.
    pub fn coherence(&self, j: usize, k: usize) -> f64 {
        self.rho[j][k].norm()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho[0][0] + self.rho[1][1] + self.rho[2][2]
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..3 {
            for k in j..3 {
                worst = worst.max((self.rho[j][k] - self.rho[k][j].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigenvalues(&self.hermitian_part())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn hermitian_part(&self) -> [[Complex64; 3]; 3] {
        let mut h = [[ZERO; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                h[j][k] = (self.rho[j][k] + self.rho[k][j].conj()) * 0.5;
            }
        }
        h
    }

    /// Checks Hermiticity, unit trace and positivity against `tol`.
    pub fn check(&self, tol: f64, time: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if !(herm <= tol) {
            return Err(Error::NumericalInstability { time, what: "hermiticity", deviation: herm });
        }
        let tr = (self.trace() - Complex64::new(1.0, 0.0)).norm();
        if !(tr <= tol) {
            return Err(Error::NumericalInstability { time, what: "trace", deviation: tr });
        }
        let min = self.min_eigenvalue();
        if !(min >= -tol) {
            return Err(Error::NumericalInstability { time, what: "positivity", deviation: -min });
        }
        Ok(())
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..3 {
            for k in 0..3 {
                worst = worst.max((self.rho[j][k] - other.rho[j][k]).norm());
            }
        }
        worst
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = *self;
        for row in out.rho.iter_mut() {
            for z in row.iter_mut() {
                *z = f(*z);
            }
        }
        out
    }

    /// Packs the independent elements `[ρ00, ρ11, ρ22, ρ10, ρ20, ρ21]` as nine reals.
    pub(crate) fn to_compact(self) -> [f64; 9] {
        let r = &self.rho;
        [
            r[0][0].re,
            r[1][1].re,
            r[2][2].re,
            r[1][0].re,
            r[1][0].im,
            r[2][0].re,
            r[2][0].im,
            r[2][1].re,
            r[2][1].im,
        ]
    }

    pub(crate) fn from_compact(y: &[f64; 9]) -> Self {
        let c10 = Complex64::new(y[3], y[4]);
        let c20 = Complex64::new(y[5], y[6]);
        let c21 = Complex64::new(y[7], y[8]);
        let re = |x: f64| Complex64::new(x, 0.0);
        Self {
            rho: [
                [re(y[0]), c10.conj(), c20.conj()],
                [c10, re(y[1]), c21.conj()],
                [c20, c21, re(y[2])],
            ],
        }
    }
}

fn hermitian_eigenvalues(a: &[[Complex64; 3]; 3]) -> [f64; 3] {
    let d = [a[0][0].re, a[1][1].re, a[2][2].re];
    let p1 = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
    let q = (d[0] + d[1] + d[2]) / 3.0;
    let p2 = (d[0] - q).powi(2) + (d[1] - q).powi(2) + (d[2] - q).powi(2) + 2.0 * p1;
    if p2 <= f64::MIN_POSITIVE {
        return [q, q, q];
    }
    let p = (p2 / 6.0).sqrt();
    // det(A − qI) for a Hermitian matrix
    let (b0, b1, b2) = (d[0] - q, d[1] - q, d[2] - q);
    let det = b0 * b1 * b2 + 2.0 * (a[0][1] * a[1][2] * a[2][0]).re
        - b0 * a[1][2].norm_sqr()
        - b1 * a[0][2].norm_sqr()
        - b2 * a[0][1].norm_sqr();
    let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}
