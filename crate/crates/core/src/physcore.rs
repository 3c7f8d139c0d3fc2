//! SI constants, ⁸⁷Rb atomic data and the handful of unit conversions used
//! across the crate.
//!
//! Everything is SI internally. Angular frequencies (rad/s) are used inside
//! formulas; ordinary frequencies (Hz = ω/2π) appear at module boundaries.

use std::f64::consts::PI;

/// Planck constant, J·s (exact).
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = H_PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Bohr magneton, J/T (CODATA 2018).
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability, T·m/A (CODATA 2018).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Standard gravity, m/s².
pub const G_GRAV: f64 = 9.806_65;
/// Speed of light, m/s (exact).
pub const C_LIGHT: f64 = 299_792_458.0;
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub mu_b: f64,
    pub mu_0: f64,
    pub g_grav: f64,
}

pub const CONSTANTS: PhysicalConstants =
    PhysicalConstants { hbar: HBAR, k_b: K_B, mu_b: MU_B, mu_0: MU_0, g_grav: G_GRAV };

/// Ground-state data of an alkali atom with J = 1/2.
///
/// Sign convention for the g-factors follows the usual Zeeman Hamiltonian
/// `H_B = μ_B (g_J J_z + g_I I_z) B`, so `g_I` is negative for ⁸⁷Rb and the
/// upper hyperfine manifold has `g_F ≈ +1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies {
    /// Atomic mass, kg.
    pub mass: f64,
    pub nuclear_spin: f64,
    /// Zero-field ground-state hyperfine splitting, Hz.
    pub hyperfine_splitting: f64,
    pub g_j: f64,
    pub g_i: f64,
    /// Free-electron spin g-factor.
    pub g_s: f64,
}

pub const RB87: AtomSpecies = AtomSpecies {
    mass: 86.909_180_527 * AMU,
    nuclear_spin: 1.5,
    hyperfine_splitting: 6.834_682_610_904_29e9,
    g_j: 2.002_331_13,
    g_i: -0.000_995_141_4,
    g_s: 2.002_319_304_36,
};

impl AtomSpecies {
    /// Copy of the species with the nuclear g-factor switched off.
    pub fn without_nuclear_g(mut self) -> Self {
        self.g_i = 0.0;
        self
    }

    /// Hyperfine Landé factor `g_F` for total angular momentum `f` (J = 1/2).
    pub fn g_f(&self, f: u8) -> f64 {
        let f = f64::from(f);
        let i = self.nuclear_spin;
        let j = 0.5;
        let ff = f * (f + 1.0);
        let ii = i * (i + 1.0);
        let jj = j * (j + 1.0);
        self.g_j * (ff - ii + jj) / (2.0 * ff) + self.g_i * (ff + ii - jj) / (2.0 * ff)
    }

    /// Zero-field hyperfine splitting as an energy, J.
    pub fn hyperfine_energy(&self) -> f64 {
        freq_to_energy(self.hyperfine_splitting)
    }
}

/// `E = h f`.
pub fn freq_to_energy(f: f64) -> f64 {
    H_PLANCK * f
}

/// `f = E / h`.
pub fn energy_to_freq(e: f64) -> f64 {
    e / H_PLANCK
}

pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(freq_to_energy(0.0), 0.0);
        assert_eq!(energy_to_freq(0.0), 0.0);
    }

    #[test]
    fn one_hertz_is_planck() {
        assert_eq!(freq_to_energy(1.0), 6.626_070_15e-34);
        assert_eq!(energy_to_freq(6.626_070_15e-34), 1.0);
    }

    #[test]
    fn round_trip_and_linearity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1_000_000 {
            let x: f64 = rng.random_range(-1e12..1e12);
            let back = energy_to_freq(freq_to_energy(x));
            assert!((back - x).abs() <= 1e-15 * x.abs(), "{x} -> {back}");
        }
        let e = 3.7e-27;
        assert_eq!(energy_to_freq(2.0 * e), 2.0 * energy_to_freq(e));
    }

    #[test]
    fn constants_are_positive_and_stable() {
        let a = CONSTANTS;
        let b = CONSTANTS;
        assert_eq!(a, b);
        for v in [a.hbar, a.k_b, a.mu_b, a.mu_0, a.g_grav] {
            assert!(v > 0.0);
        }
    }

    #[test]
    fn lande_factors_have_expected_signs() {
        let gf2 = RB87.g_f(2);
        let gf1 = RB87.g_f(1);
        assert!((gf2 - 0.5).abs() < 2e-3, "{gf2}");
        assert!((gf1 + 0.5).abs() < 3e-3, "{gf1}");
        let simple = RB87.without_nuclear_g();
        assert!((simple.g_f(2) - simple.g_j / 4.0).abs() < 1e-15);
        assert!((simple.g_f(1) + simple.g_j / 4.0).abs() < 1e-15);
    }
}
