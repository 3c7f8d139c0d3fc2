//! ⁸⁷Rb ground-state hyperfine/Zeeman structure.
//!
//! Energies follow the Breit–Rabi closed form for J = 1/2 and are referenced
//! to the zero-field centroid of the whole ground state (the hyperfine
//! Hamiltonian is traceless), so only differences carry physical meaning.
//! States are adiabatic labels that follow the local field direction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physcore::{energy_to_freq, AtomSpecies, MU_B};

/// `|F, m_F⟩` label of a ground-state sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HyperfineState {
    pub f: u8,
    pub m_f: i8,
}

impl HyperfineState {
    pub fn new(f: u8, m_f: i8) -> Result<Self> {
        if !(f == 1 || f == 2) {
            return Err(Error::Domain(format!("F = {f} is not a ⁸⁷Rb ground-state manifold")));
        }
        if m_f.unsigned_abs() > f {
            return Err(Error::Domain(format!("|m_F| = {} exceeds F = {f}", m_f.abs())));
        }
        Ok(Self { f, m_f })
    }

    /// `|F=2, m_F=2⟩`, the auxiliary level of the gate.
    pub const fn aux() -> Self {
        Self { f: 2, m_f: 2 }
    }

    /// `|F=2, m_F=1⟩ ≡ |↑⟩`.
    pub const fn up() -> Self {
        Self { f: 2, m_f: 1 }
    }

    /// `|F=1, m_F=−1⟩ ≡ |↓⟩`.
    pub const fn down() -> Self {
        Self { f: 1, m_f: -1 }
    }

    pub fn label(&self) -> Option<&'static str> {
        match (self.f, self.m_f) {
            (2, 2) => Some("aux"),
            (2, 1) => Some("up"),
            (1, -1) => Some("down"),
            _ => None,
        }
    }

    /// Short file-name friendly tag, e.g. `F2_m1` or `F1_m-1`.
    pub fn tag(&self) -> String {
        format!("F{}_m{}", self.f, self.m_f)
    }
}

impl fmt::Display for HyperfineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.f, self.m_f)
    }
}

impl std::str::FromStr for HyperfineState {
    type Err = Error;

    /// Accepts `"2,1"`, `"|2,1>"` or one of the aliases `aux`, `up`, `down`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('|').trim_end_matches('>');
        match t {
            "aux" => return Ok(Self::aux()),
            "up" => return Ok(Self::up()),
            "down" => return Ok(Self::down()),
            _ => {}
        }
        let (a, b) = t.split_once(',').ok_or_else(|| Error::Config(format!("cannot parse hyperfine state '{s}'")))?;
        let f: u8 = a.trim().parse().map_err(|_| Error::Config(format!("bad F in '{s}'")))?;
        let m: i8 = b.trim().parse().map_err(|_| Error::Config(format!("bad m_F in '{s}'")))?;
        Self::new(f, m).map_err(|e| Error::Config(e.to_string()))
    }
}

/// All eight ground-state sublevels, F = 1 first.
pub fn all_states() -> Vec<HyperfineState> {
    let mut v = Vec::with_capacity(8);
    for f in [1u8, 2] {
        for m in -(f as i8)..=(f as i8) {
            v.push(HyperfineState { f, m_f: m });
        }
    }
    v
}

/// Breit–Rabi energy (J) of `s` in a field of magnitude `b` (T).
pub fn breit_rabi_energy(species: &AtomSpecies, s: HyperfineState, b: f64) -> f64 {
    let i = species.nuclear_spin;
    let de = species.hyperfine_energy();
    let upper = f64::from(s.f) > i;
    let m = f64::from(s.m_f);
    let stretched = (m.abs() - (i + 0.5)).abs() < 1e-12;

    if upper && stretched {
        // exact linear branch; the square root below would need |1 ± x|
        return de * i / (2.0 * i + 1.0) + m.signum() * 0.5 * (species.g_j + 2.0 * i * species.g_i) * MU_B * b;
    }

    let x = (species.g_j - species.g_i) * MU_B * b / de;
    let root = (1.0 + 4.0 * m * x / (2.0 * i + 1.0) + x * x).sqrt();
    let sign = if upper { 1.0 } else { -1.0 };
    -de / (2.0 * (2.0 * i + 1.0)) + species.g_i * MU_B * m * b + sign * 0.5 * de * root
}

/// `|E(s1) − E(s2)| / h` in Hz.
pub fn transition_frequency(species: &AtomSpecies, s1: HyperfineState, s2: HyperfineState, b: f64) -> f64 {
    energy_to_freq((breit_rabi_energy(species, s1, b) - breit_rabi_energy(species, s2, b)).abs())
}

/// Field magnitude in `bracket` at which the `s1 ↔ s2` transition equals
/// `target` (Hz). Bisection down to floating-point resolution of the bracket.
pub fn field_for_resonance(
    species: &AtomSpecies,
    s1: HyperfineState,
    s2: HyperfineState,
    target: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
        return Err(Error::Domain(format!("invalid field bracket [{lo:e}, {hi:e}]")));
    }
    let resid = |b: f64| transition_frequency(species, s1, s2, b) - target;
    let mut f_lo = resid(lo);
    let f_hi = resid(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NotBracketed { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = resid(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of a level diagram: field and the eight level energies (Hz).
pub fn level_diagram(species: &AtomSpecies, fields: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let states = all_states();
    fields
        .iter()
        .map(|&b| {
            let e = states.iter().map(|&s| energy_to_freq(breit_rabi_energy(species, s, b))).collect();
            (b, e)
        })
        .collect()
}
