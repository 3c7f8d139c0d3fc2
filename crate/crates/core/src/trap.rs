//! One-dimensional atomic potential along the vertical line through a
//! lattice site: optical lattice, Casimir–Polder attraction, gravity and the
//! Zeeman energy in the field of the magnet assembly.
//!
//! `z` is the distance from the membrane surface; atoms live at `z > 0`.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetostatics::{assembly_field, MagnetAssembly};
use crate::physcore::{AtomSpecies, BOHR_RADIUS, C_LIGHT, G_GRAV, HBAR, H_PLANCK};
use crate::zeeman::{breit_rabi_energy, HyperfineState};

/// Static dipole polarisability of ground-state Rb in atomic units.
pub const RB_STATIC_POLARIZABILITY_AU: f64 = 318.8;

/// Retarded Casimir–Polder coefficient `C₄ = 3ħcα(0)/(32π²ε₀)` (J·m⁴) for an
/// atom in front of a perfect conductor, with α given in atomic units.
pub fn retarded_c4_perfect_conductor(alpha_au: f64) -> f64 {
    // α_SI = 4π ε₀ a₀³ α_au, so ε₀ drops out
    3.0 * HBAR * C_LIGHT * BOHR_RADIUS.powi(3) * alpha_au / (8.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoilConvention {
    /// `E_r = h² / (2 m λ_eff²)`.
    LambdaEff,
    /// `E_r = h² / (2 m λ²)` for an explicit laser wavelength (m).
    LaserWavelength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    pub lambda_eff: f64,
    /// Lattice depth in units of the recoil energy.
    pub depth_er: f64,
    /// Height of the first antinode (potential minimum) above the surface.
    pub antinode: f64,
    pub recoil: RecoilConvention,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { lambda_eff: 1500e-9, depth_er: 500.0, antinode: 375e-9, recoil: RecoilConvention::LambdaEff }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_er > 0.0) || !(self.lambda_eff > 0.0) {
            return Err(Error::Domain("lattice depth and λ_eff must be positive".into()));
        }
        if let RecoilConvention::LaserWavelength(l) = self.recoil {
            if !(l > 0.0) {
                return Err(Error::Domain("laser wavelength must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn recoil_energy(&self, species: &AtomSpecies) -> f64 {
        let lambda = match self.recoil {
            RecoilConvention::LambdaEff => self.lambda_eff,
            RecoilConvention::LaserWavelength(l) => l,
        };
        H_PLANCK * H_PLANCK / (2.0 * species.mass * lambda * lambda)
    }

    /// Well depth `U₀`, J.
    pub fn depth(&self, species: &AtomSpecies) -> f64 {
        self.depth_er * self.recoil_energy(species)
    }

    /// Small-oscillation frequency (rad/s) of a sinusoidal well of depth U₀.
    pub fn harmonic_frequency(&self, species: &AtomSpecies) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.lambda_eff;
        k * (2.0 * self.depth(species) / species.mass).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    pub c4: f64,
    /// Membrane plus metal film thickness; geometric only.
    pub membrane_thickness: f64,
    pub temperature: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            c4: retarded_c4_perfect_conductor(RB_STATIC_POLARIZABILITY_AU),
            membrane_thickness: 150e-9,
            temperature: 300.0,
        }
    }
}

/// `−U₀ cos²(2π (z − d)/λ_eff)`: minimum `−U₀` at the antinode `d`, period `λ_eff/2`.
pub fn optical_potential(species: &AtomSpecies, z: f64, cfg: &LatticeConfig) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (z - cfg.antinode) / cfg.lambda_eff;
    -cfg.depth(species) * phase.cos().powi(2)
}

/// `−C₄ / z⁴`.
pub fn casimir_polder(z: f64, cfg: &SurfaceConfig) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("Casimir–Polder potential needs z > 0, got {z:e}")));
    }
    Ok(-cfg.c4 / z.powi(4))
}

/// Zeeman energy of `s` in field `b`, relative to the same state at zero field.
pub fn zeeman_potential(species: &AtomSpecies, s: HyperfineState, b: &Vector3<f64>) -> f64 {
    breit_rabi_energy(species, s, b.norm()) - breit_rabi_energy(species, s, 0.0)
}

/// Which contributions enter the total potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PotentialTerms {
    pub optical: bool,
    pub casimir_polder: bool,
    pub gravity: bool,
    pub magnetic: bool,
}

impl PotentialTerms {
    pub const ALL: Self = Self { optical: true, casimir_polder: true, gravity: true, magnetic: true };
    pub const NONE: Self = Self { optical: false, casimir_polder: false, gravity: false, magnetic: false };
}

/// A one-dimensional potential `U(z)` for a particle of known mass.
pub trait Potential1D: Sync {
    fn potential(&self, z: f64) -> Result<f64>;
    fn mass(&self) -> f64;
}

/// Everything needed to evaluate the total potential of one hyperfine state.
#[derive(Debug, Clone)]
pub struct TrapContext {
    pub species: AtomSpecies,
    pub state: HyperfineState,
    pub assembly: MagnetAssembly,
    pub lattice: LatticeConfig,
    pub surface: SurfaceConfig,
    /// Lateral (x, y) position of the vertical cut.
    pub lateral: (f64, f64),
    pub terms: PotentialTerms,
    /// +1 if potential energy grows with z, −1 if it falls. Atoms hang below
    /// the membrane with z pointing down, hence −1 by default.
    pub gravity_sign: f64,
}

impl TrapContext {
    pub fn new(
        species: AtomSpecies,
        state: HyperfineState,
        assembly: MagnetAssembly,
        lattice: LatticeConfig,
        surface: SurfaceConfig,
    ) -> Self {
        Self {
            species,
            state,
            assembly,
            lattice,
            surface,
            lateral: (0.0, 0.0),
            terms: PotentialTerms::ALL,
            gravity_sign: -1.0,
        }
    }

    pub fn with_terms(mut self, terms: PotentialTerms) -> Self {
        self.terms = terms;
        self
    }

    pub fn with_state(mut self, state: HyperfineState) -> Self {
        self.state = state;
        self
    }

    pub fn point(&self, z: f64) -> Vector3<f64> {
        Vector3::new(self.lateral.0, self.lateral.1, z)
    }

    pub fn magnetic_term(&self, z: f64) -> Result<f64> {
        let b = assembly_field(&self.assembly, &self.point(z))?;
        Ok(zeeman_potential(&self.species, self.state, &b))
    }

    pub fn gravity_term(&self, z: f64) -> f64 {
        self.gravity_sign * self.species.mass * G_GRAV * z
    }

    /// Sum of the enabled terms.
    pub fn total_potential(&self, z: f64) -> Result<f64> {
        let t = self.terms;
        let mut u = 0.0;
        if t.optical {
            u += optical_potential(&self.species, z, &self.lattice);
        }
        if t.casimir_polder {
            u += casimir_polder(z, &self.surface)?;
        }
        if t.gravity {
            u += self.gravity_term(z);
        }
        if t.magnetic {
            u += self.magnetic_term(z)?;
        }
        Ok(u)
    }

    /// Bracket of ±λ_eff/8 around the configured antinode.
    pub fn default_bracket(&self) -> (f64, f64) {
        let w = self.lattice.lambda_eff / 8.0;
        ((self.lattice.antinode - w).max(1e-9), self.lattice.antinode + w)
    }

    pub fn trap_minimum(&self) -> Result<f64> {
        find_trap_minimum(self, self.default_bracket())
    }

    /// Barrier toward the surface of the well nearest the configured antinode.
    pub fn barrier(&self) -> Result<f64> {
        let z_min = self.trap_minimum()?;
        let reach = z_min - self.lattice.lambda_eff / 2.0;
        // without the Casimir–Polder singularity the potential can be probed
        // below the surface plane; magnets below stop the scan on their own
        let lower = if self.terms.casimir_polder { reach.max(1e-9) } else { reach };
        barrier_toward_surface(self, z_min, lower)
    }
}

impl Potential1D for TrapContext {
    fn potential(&self, z: f64) -> Result<f64> {
        self.total_potential(z)
    }

    fn mass(&self) -> f64 {
        self.species.mass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    pub z_grid: Vec<f64>,
    pub u: Vec<f64>,
    pub state: HyperfineState,
}

impl PotentialCurve {
    pub fn validate(&self) -> Result<()> {
        if self.z_grid.len() != self.u.len() {
            return Err(Error::Dimension { expected: self.z_grid.len(), found: self.u.len() });
        }
        if self.z_grid.iter().any(|&z| !(z > 0.0)) || self.z_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("z grid must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Evaluates `f` on every grid point in parallel.
pub fn sample_curve<F>(ctx: &TrapContext, z_grid: &[f64], f: F) -> Result<PotentialCurve>
where
    F: Fn(&TrapContext, f64) -> Result<f64> + Sync,
{
    let u = z_grid.par_iter().map(|&z| f(ctx, z)).collect::<Result<Vec<_>>>()?;
    let curve = PotentialCurve { z_grid: z_grid.to_vec(), u, state: ctx.state };
    curve.validate()?;
    Ok(curve)
}

pub fn potential_curve(ctx: &TrapContext, z_grid: &[f64]) -> Result<PotentialCurve> {
    sample_curve(ctx, z_grid, |c, z| c.total_potential(z))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_section<P: Potential1D + ?Sized>(pot: &P, lo: f64, hi: f64, tol: f64, maximize: bool) -> Result<f64> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let f = |z: f64| pot.potential(z).map(|u| sign * u);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn central_derivative<P: Potential1D + ?Sized>(pot: &P, z: f64, h: f64) -> Result<f64> {
    Ok((pot.potential(z + h)? - pot.potential(z - h)?) / (2.0 * h))
}

/// Location of the single local minimum of `pot` inside `bracket`.
///
/// Golden-section search followed by bisection on the central-difference
/// derivative. Fails if the minimum sits on the bracket boundary.
pub fn find_trap_minimum<P: Potential1D + ?Sized>(pot: &P, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty bracket [{lo:e}, {hi:e}]")));
    }
    let width = hi - lo;
    let z0 = golden_section(pot, lo, hi, 1e-6 * width, false)?;
    let edge = 1e-3 * width;
    if z0 - lo < edge || hi - z0 < edge {
        return Err(Error::NoMinimum { lo, hi });
    }
    let u0 = pot.potential(z0)?;
    if !(u0 < pot.potential(lo)? && u0 < pot.potential(hi)?) {
        return Err(Error::NoMinimum { lo, hi });
    }

    // refine on U' = 0 within a small window around the golden estimate
    let h = 1e-4 * width.min(1e-6);
    let mut a = (z0 - 2e-5 * width).max(lo);
    let mut b = (z0 + 2e-5 * width).min(hi);
    let mut da = central_derivative(pot, a, h)?;
    let db = central_derivative(pot, b, h)?;
    if !(da < 0.0 && db > 0.0) {
        return Ok(z0);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let dm = central_derivative(pot, m, h)?;
        if dm == 0.0 {
            return Ok(m);
        }
        if dm.signum() == da.signum() {
            a = m;
            da = dm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn five_point_second_derivative<P: Potential1D + ?Sized>(pot: &P, z: f64, h: f64) -> Result<f64> {
    let u = |x: f64| pot.potential(x);
    Ok((-u(z + 2.0 * h)? + 16.0 * u(z + h)? - 30.0 * u(z)? + 16.0 * u(z - h)? - u(z - 2.0 * h)?) / (12.0 * h * h))
}

/// Default finite-difference step for curvature estimates, m.
pub const CURVATURE_STEP: f64 = 2e-9;

/// `ω_t = sqrt(U''(z_min)/m)` (rad/s).
///
/// `U''` is a five-point central difference at steps `h` and `h/2`,
/// combined by Richardson extrapolation; the two raw estimates must agree.
pub fn trap_frequency<P: Potential1D + ?Sized>(pot: &P, z_min: f64) -> Result<f64> {
    let h = CURVATURE_STEP;
    let d1 = five_point_second_derivative(pot, z_min, h)?;
    let d2 = five_point_second_derivative(pot, z_min, 0.5 * h)?;
    let curvature = (16.0 * d2 - d1) / 15.0;
    if !(curvature > 0.0) {
        return Err(Error::Domain(format!("U'' = {curvature:e} J/m² at z = {z_min:e}: not a minimum")));
    }
    if (d1 - d2).abs() > 1e-4 * curvature {
        return Err(Error::Domain(format!("curvature estimate not converged: {d1:e} vs {d2:e} J/m²")));
    }
    Ok((curvature / pot.mass()).sqrt())
}

/// `U(z_max) − U(z_min)` for the highest point between `z_min` and the
/// surface side limit `lower`; zero if the potential never rises above `U(z_min)`.
pub fn barrier_toward_surface<P: Potential1D + ?Sized>(pot: &P, z_min: f64, lower: f64) -> Result<f64> {
    let u_min = pot.potential(z_min)?;
    let n = 2000;
    let step = (z_min - lower) / n as f64;
    let mut best = (z_min, u_min);
    let mut prev = u_min;
    for i in 1..=n {
        let z = z_min - step * i as f64;
        let u = match pot.potential(z) {
            Ok(u) => u,
            // ran into a magnet or the surface: stop the scan there
            Err(_) => break,
        };
        if u > best.1 {
            best = (z, u);
        }
        if u < prev && best.0 > z {
            // first local maximum passed
            break;
        }
        prev = u;
    }
    if best.1 <= u_min {
        return Ok(0.0);
    }
    let a = (best.0 - step).max(lower);
    let b = (best.0 + step).min(z_min);
    let z_top = golden_section(pot, a, b, 1e-15_f64.max(1e-9 * step), true)?;
    let top = pot.potential(z_top)?.max(best.1);
    Ok(top - u_min)
}

/// Zero-point amplitude `sqrt(ħ / (2 m ω))` of the trapped atom.
pub fn atom_zero_point(species: &AtomSpecies, omega_t: f64) -> f64 {
    (HBAR / (2.0 * species.mass * omega_t)).sqrt()
}
