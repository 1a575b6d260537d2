//! Physical constants in the meV/fs unit system.

/// Reduced Planck constant, meV·fs.
pub const HBAR: f64 = 658.211_956_9;
/// Planck constant, meV·fs.
pub const PLANCK: f64 = 4_135.667_696;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub h: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            h: PLANCK,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn planck_is_two_pi_hbar() {
        let c = PhysicalConstants::default();
        assert!((c.h - 2.0 * PI * c.hbar).abs() / c.h < 1e-9);
    }
}
