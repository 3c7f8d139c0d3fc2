//! Closed-form sensitivity, coupling and decoherence estimates, and the
//! rate budget as a function of atom–surface distance.
//!
//! Rates are returned in ordinary Hz (angular rate / 2π) unless the name
//! says otherwise.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetostatics::{solve_bias_x, tip_gradient_gm, ChipGeometry};
use crate::physcore::{AtomSpecies, HBAR, K_B, MU_0, MU_B, RB87};
use crate::trap::{atom_zero_point, LatticeConfig};
use crate::zeeman::HyperfineState;

use std::f64::consts::{PI, SQRT_2};

/// Landé factor used for the coupling estimates (upper ground manifold).
pub const G_F: f64 = 0.5;
pub const SILICON_DENSITY: f64 = 2330.0;
pub const COBALT_DENSITY: f64 = 8900.0;
/// Fraction of the beam mass that moves with the tip in the fundamental mode.
pub const MODAL_MASS_FRACTION: f64 = 0.24;
/// Resistivity of platinum, Ω·m.
pub const PLATINUM_RESISTIVITY: f64 = 10.6e-8;

fn to_hz(angular: f64) -> f64 {
    angular / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CantileverConfig {
    pub length_m: f64,
    pub width_m: f64,
    pub thickness_m: f64,
    pub si_density_kg_m3: f64,
    pub magnet_mass_kg: f64,
    pub spring_k_n_per_m: f64,
    pub omega_c_rad_s: f64,
    pub q: f64,
    pub temperature_k: f64,
}

impl Default for CantileverConfig {
    fn default() -> Self {
        let tip = ChipGeometry::default().tip_size;
        Self {
            length_m: 8e-6,
            width_m: 0.2e-6,
            thickness_m: 0.1e-6,
            si_density_kg_m3: SILICON_DENSITY,
            magnet_mass_kg: COBALT_DENSITY * tip.x * tip.y * tip.z,
            spring_k_n_per_m: 0.012,
            omega_c_rad_s: 2.0 * PI * 1.1e6,
            q: 3e5,
            temperature_k: 10e-3,
        }
    }
}

impl CantileverConfig {
    pub fn beam_mass(&self) -> f64 {
        self.si_density_kg_m3 * self.length_m * self.width_m * self.thickness_m
    }

    pub fn effective_mass(&self) -> f64 {
        MODAL_MASS_FRACTION * self.beam_mass() + self.magnet_mass_kg
    }

    /// Amplitude damping rate `ω_c / 2Q`, rad/s.
    pub fn kappa(&self) -> f64 {
        self.omega_c_rad_s / (2.0 * self.q)
    }

    pub fn kappa_hz(&self) -> f64 {
        to_hz(self.kappa())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("thickness_m", self.thickness_m),
            ("spring_k_n_per_m", self.spring_k_n_per_m),
            ("omega_c_rad_s", self.omega_c_rad_s),
            ("q", self.q),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("cantilever {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("si_density_kg_m3", self.si_density_kg_m3),
            ("magnet_mass_kg", self.magnet_mass_kg),
            ("temperature_k", self.temperature_k),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Domain(format!("cantilever {name} must be non-negative, got {v}")));
            }
        }
        if !(self.effective_mass() > 0.0) {
            return Err(Error::Domain("cantilever effective mass must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetalFilmConfig {
    pub conductivity_s_per_m: f64,
    pub thickness_m: f64,
    pub temperature_k: f64,
}

impl Default for MetalFilmConfig {
    fn default() -> Self {
        Self { conductivity_s_per_m: 1.0 / PLATINUM_RESISTIVITY, thickness_m: 30e-9, temperature_k: 300.0 }
    }
}

impl MetalFilmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conductivity_s_per_m >= 0.0 && self.thickness_m > 0.0 && self.temperature_k >= 0.0) {
            return Err(Error::Domain("metal film parameters out of range".into()));
        }
        Ok(())
    }
}

/// Rates at one atom–surface distance, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub d: f64,
    pub g_eff_hz: f64,
    pub gamma_spinflip_hz: f64,
    pub gamma_dephase_surface_hz: f64,
    pub gamma_dephase_bias_hz: f64,
    pub gamma_heat_surface_hz: f64,
    pub gamma_heat_bias_hz: f64,
    pub gamma_vac_hz: f64,
    pub kappa_hz: f64,
}

impl RateBudget {
    pub fn rates(&self) -> [f64; 7] {
        [
            self.gamma_spinflip_hz,
            self.gamma_dephase_surface_hz,
            self.gamma_dephase_bias_hz,
            self.gamma_heat_surface_hz,
            self.gamma_heat_bias_hz,
            self.gamma_vac_hz,
            self.kappa_hz,
        ]
    }

    /// Sum of the atomic loss and decoherence rates, optionally with κ/2π.
    pub fn total_rate_hz(&self, include_kappa: bool) -> f64 {
        let r = self.rates();
        let atomic: f64 = r[..6].iter().sum();
        if include_kappa {
            atomic + self.kappa_hz
        } else {
            atomic
        }
    }

    pub fn coupling_ratio(&self, include_kappa: bool) -> f64 {
        self.g_eff_hz / self.total_rate_hz(include_kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if self.g_eff_hz < 0.0 || self.rates().iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Domain(format!("negative or NaN rate in budget at d = {:e}", self.d)));
        }
        Ok(())
    }
}

/// `z_qm = sqrt(ħ / (2 m_eff ω_c))`.
pub fn zero_point_amplitude(c: &CantileverConfig) -> f64 {
    (HBAR / (2.0 * c.effective_mass() * c.omega_c_rad_s)).sqrt()
}

/// Thermal force noise in bandwidth `b` (Hz): `sqrt(4 k k_B T b / (ω_c Q))`.
pub fn min_detectable_force(c: &CantileverConfig, bandwidth_b: f64) -> f64 {
    (4.0 * c.spring_k_n_per_m * K_B * c.temperature_k * bandwidth_b / (c.omega_c_rad_s * c.q)).sqrt()
}

/// Rms force of a precessing spin on the tip: `g_F μ_B G_m / √2`.
pub fn spin_precession_force(g_m: f64) -> f64 {
    G_F * MU_B * g_m / SQRT_2
}

/// Largest thermal occupation for which a drive Ω₀ still resolves a single
/// phonon: `(Ω₀ Q / (√2 ω_c))²`.
pub fn max_thermal_occupation(omega_0: f64, q: f64, omega_c: f64) -> f64 {
    (omega_0 * q / (SQRT_2 * omega_c)).powi(2)
}

/// Rabi frequency (rad/s) from a tip displacement `δz` in gradient `G_m`.
pub fn rabi_from_drive(delta_z: f64, g_m: f64) -> f64 {
    G_F * g_m * MU_B * delta_z / HBAR
}

/// Spin–cantilever coupling `g_F G_m z_qm μ_B / ħ`, in Hz.
pub fn g_eff_coupling(g_m: f64, z_qm: f64) -> f64 {
    to_hz(rabi_from_drive(z_qm, g_m))
}

fn check_distance(d: f64) -> Result<()> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("atom–surface distance must be positive, got {d:e}")));
    }
    Ok(())
}

/// Quasi-static thermal field noise from a thin film, component parallel to
/// the surface normal direction used for dephasing, T²/Hz.
pub fn s_b_parallel(f: &MetalFilmConfig, d: f64) -> Result<f64> {
    check_distance(d)?;
    let h = f.thickness_m;
    Ok(MU_0 * MU_0 / (32.0 * PI) * K_B * f.temperature_k * f.conductivity_s_per_m * h / (d * (d + h)))
}

pub fn s_b_perp(f: &MetalFilmConfig, d: f64) -> Result<f64> {
    Ok(2.0 * s_b_parallel(f, d)?)
}

/// `sqrt(2 / (μ₀ σ ω))`; infinite for an insulator.
pub fn skin_depth(f: &MetalFilmConfig, omega: f64) -> f64 {
    (2.0 / (MU_0 * f.conductivity_s_per_m * omega)).sqrt()
}

/// Dephasing from a field fluctuation ΔB acting on a moment difference δμ.
pub fn dephasing_rate_background(delta_b: f64, dmu_parallel: f64) -> f64 {
    to_hz(dmu_parallel * delta_b / HBAR)
}

/// `δμ² S_B∥ / (2ħ²)`, in Hz.
pub fn dephasing_rate_surface(f: &MetalFilmConfig, d: f64, dmu_parallel: f64) -> Result<f64> {
    Ok(to_hz(dmu_parallel * dmu_parallel * s_b_parallel(f, d)? / (2.0 * HBAR * HBAR)))
}

/// `|⟨F, m_to| F_± |F, m_from⟩|²` for `m_to = m_from ± 1`, zero otherwise.
pub fn ladder_matrix_element_sq(f: u8, m_from: i8, m_to: i8) -> f64 {
    let (ff, m) = (f64::from(f), f64::from(m_from));
    match i16::from(m_to) - i16::from(m_from) {
        1 => ff * (ff + 1.0) - m * (m + 1.0),
        -1 => ff * (ff + 1.0) - m * (m - 1.0),
        _ => 0.0,
    }
    .max(0.0)
}

/// `Σ_{α=x,y} |⟨f|F_α|i⟩|²`: each Cartesian component carries half of the
/// ladder element.
pub fn transverse_matrix_element_sq(i: HyperfineState, f: HyperfineState) -> f64 {
    if i.f != f.f {
        return 0.0;
    }
    0.5 * ladder_matrix_element_sq(i.f, i.m_f, f.m_f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinFlipRate {
    pub rate_hz: f64,
    pub skin_depth: f64,
    /// False when the skin depth is not at least ten film thicknesses.
    pub thin_film_valid: bool,
}

/// Magnetic-dipole transition rate driven by transverse surface noise at the
/// Larmor frequency.
pub fn spin_flip_rate(
    species: &AtomSpecies,
    i: HyperfineState,
    f: HyperfineState,
    film: &MetalFilmConfig,
    d: f64,
    omega_l: f64,
) -> Result<SpinFlipRate> {
    let s_perp = s_b_perp(film, d)?;
    let delta = skin_depth(film, omega_l);
    let g_f = species.g_f(i.f);
    let rate = MU_B * MU_B * g_f * g_f * transverse_matrix_element_sq(i, f) * s_perp / (HBAR * HBAR);
    Ok(SpinFlipRate { rate_hz: to_hz(rate), skin_depth: delta, thin_film_valid: delta >= 10.0 * film.thickness_m })
}

/// Total spin-flip rate out of `i` into all adjacent sublevels of its manifold.
pub fn spin_flip_out_of(
    species: &AtomSpecies,
    i: HyperfineState,
    film: &MetalFilmConfig,
    d: f64,
    omega_l: f64,
) -> Result<SpinFlipRate> {
    let mut total = SpinFlipRate { rate_hz: 0.0, skin_depth: skin_depth(film, omega_l), thin_film_valid: true };
    for dm in [-1i8, 1] {
        if let Ok(f) = HyperfineState::new(i.f, i.m_f + dm) {
            let r = spin_flip_rate(species, i, f, film, d, omega_l)?;
            total.rate_hz += r.rate_hz;
            total.thin_film_valid &= r.thin_film_valid;
        }
    }
    Ok(total)
}

/// `μ∥² a² S_B∥ / (ħ² d²)`, in Hz. `amplitude` is the zero-point spread
/// of the heated oscillator.
pub fn heating_rate_surface(d: f64, film: &MetalFilmConfig, amplitude: f64, mu_parallel: f64) -> Result<f64> {
    let s = s_b_parallel(film, d)?;
    Ok(to_hz(mu_parallel * mu_parallel / (HBAR * HBAR) * amplitude * amplitude / (d * d) * s))
}

/// Parametric heating from trap-position noise: `m ω_t³ S_h / (2ħ)`, in Hz.
pub fn heating_rate_bias(species: &AtomSpecies, s_h: f64, omega_t: f64) -> f64 {
    to_hz(species.mass * omega_t.powi(3) * s_h / (2.0 * HBAR))
}

/// Trap displacement per tesla of bias change.
///
/// A bias change ΔB moves the zero of the transverse field by ΔB/G_m; the
/// resulting Zeeman force `δμ G_m ΔB / |B|` is balanced by the trap
/// stiffness `m ω_t²`.
pub fn bias_displacement_per_tesla(species: &AtomSpecies, dmu: f64, g_m: f64, b_mag: f64, omega_t: f64) -> f64 {
    (dmu * g_m).abs() / (b_mag * species.mass * omega_t * omega_t)
}

/// `S_h = (δz/ΔB)² ΔB² / bandwidth`, m²/Hz.
pub fn bias_height_spectrum(per_tesla: f64, delta_b: f64, bandwidth: f64) -> f64 {
    per_tesla * per_tesla * delta_b * delta_b / bandwidth
}

/// Which zero-point spread multiplies the surface heating rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatingAmplitude {
    Atom,
    Cantilever,
}

/// Everything the distance sweep needs besides the distance itself.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub species: AtomSpecies,
    pub geometry: ChipGeometry,
    pub cantilever: CantileverConfig,
    pub film: MetalFilmConfig,
    pub lattice: LatticeConfig,
    /// State whose moment is heated by surface noise.
    pub trapped_state: HyperfineState,
    /// State whose spin-flip loss is reported.
    pub spin_flip_state: HyperfineState,
    pub dmu_parallel: f64,
    pub delta_b_bias: f64,
    pub bias_bandwidth_hz: f64,
    pub gamma_vac_hz: f64,
    pub heating_amplitude: HeatingAmplitude,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            species: RB87,
            geometry: ChipGeometry::default(),
            cantilever: CantileverConfig::default(),
            film: MetalFilmConfig::default(),
            lattice: LatticeConfig::default(),
            trapped_state: HyperfineState::up(),
            spin_flip_state: HyperfineState::aux(),
            dmu_parallel: MU_B / 2.0,
            delta_b_bias: 0.1e-9,
            // one gate time, 80 ms
            bias_bandwidth_hz: 12.5,
            gamma_vac_hz: 0.05,
            heating_amplitude: HeatingAmplitude::Atom,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.cantilever.validate()?;
        self.film.validate()?;
        self.lattice.validate()?;
        if !(self.bias_bandwidth_hz > 0.0) || self.delta_b_bias < 0.0 || self.gamma_vac_hz < 0.0 {
            return Err(Error::Domain("bias noise and background loss must be non-negative".into()));
        }
        Ok(())
    }

    pub fn mu_parallel(&self) -> f64 {
        G_F * f64::from(self.trapped_state.m_f) * MU_B
    }

    /// Tip coupling gradient with the atom at height `d` and the bias
    /// re-nulled there.
    pub fn coupling_gradient(&self, d: f64) -> Result<(f64, f64)> {
        let g = ChipGeometry { trap_height: d, ..self.geometry.clone() };
        let a = g.assembly()?;
        let p = g.trap_point();
        let b = crate::magnetostatics::assembly_field(&a, &p)?.norm();
        Ok((tip_gradient_gm(&a, &p, &Vector3::z())?, b))
    }
}

/// `G_m` of a lone tip for an atom `distance` above the magnet centre, with
/// the x bias nulled at the atom.
pub fn isolated_tip_gradient(geometry: &ChipGeometry, distance: f64) -> Result<f64> {
    let mut a = geometry.single_tip()?;
    let p = Vector3::new(0.0, 0.0, distance - geometry.magnet_depth);
    a.bias_field.x = solve_bias_x(&a, &p)?;
    tip_gradient_gm(&a, &p, &Vector3::z())
}

/// Full rate budget at distance `d`.
pub fn rate_budget(cfg: &SweepConfig, d: f64) -> Result<RateBudget> {
    check_distance(d)?;
    let sp = &cfg.species;
    let (g_m, b_mag) = cfg.coupling_gradient(d)?;
    let z_qm = zero_point_amplitude(&cfg.cantilever);
    let omega_t = cfg.lattice.harmonic_frequency(sp);
    let amplitude = match cfg.heating_amplitude {
        HeatingAmplitude::Atom => atom_zero_point(sp, omega_t),
        HeatingAmplitude::Cantilever => z_qm,
    };
    let per_tesla = bias_displacement_per_tesla(sp, cfg.dmu_parallel, g_m, b_mag, omega_t);
    let s_h = bias_height_spectrum(per_tesla, cfg.delta_b_bias, cfg.bias_bandwidth_hz);
    let budget = RateBudget {
        d,
        g_eff_hz: g_eff_coupling(g_m, z_qm),
        gamma_spinflip_hz: spin_flip_out_of(sp, cfg.spin_flip_state, &cfg.film, d, cfg.cantilever.omega_c_rad_s)?
            .rate_hz,
        gamma_dephase_surface_hz: dephasing_rate_surface(&cfg.film, d, cfg.dmu_parallel)?,
        gamma_dephase_bias_hz: dephasing_rate_background(cfg.delta_b_bias, cfg.dmu_parallel),
        gamma_heat_surface_hz: heating_rate_surface(d, &cfg.film, amplitude, cfg.mu_parallel())?,
        gamma_heat_bias_hz: heating_rate_bias(sp, s_h, omega_t),
        gamma_vac_hz: cfg.gamma_vac_hz,
        kappa_hz: cfg.cantilever.kappa_hz(),
    };
    budget.validate()?;
    Ok(budget)
}

/// Budgets for every distance, computed in parallel; output order follows input.
pub fn rate_sweep(cfg: &SweepConfig, d_range: &[f64]) -> Result<Vec<RateBudget>> {
    cfg.validate()?;
    if d_range.iter().any(|&d| !(d > 0.0)) || d_range.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("distances must be positive and strictly ascending".into()));
    }
    d_range.par_iter().map(|&d| rate_budget(cfg, d)).collect()
}

/// Distance with the largest coupling-to-loss ratio among `budgets`.
pub fn best_distance(budgets: &[RateBudget], include_kappa: bool) -> Option<f64> {
    budgets
        .iter()
        .max_by(|a, b| a.coupling_ratio(include_kappa).total_cmp(&b.coupling_ratio(include_kappa)))
        .map(|b| b.d)
}
