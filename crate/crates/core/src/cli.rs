//! Command-line front end: configuration, subcommands and file output.
//!
//! Configuration is JSON with the unit in every key name. Unknown keys are
//! rejected; missing keys take the built-in defaults, which reproduce the
//! reference operating point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{trajectory_table, EvolveOptions};
use crate::error::{Error, Result};
use crate::magnetostatics::{ChipGeometry, CompensationPolarity};
use crate::noise::{
    g_eff_coupling, isolated_tip_gradient, max_thermal_occupation, min_detectable_force, rate_sweep,
    spin_precession_force, zero_point_amplitude, CantileverConfig, HeatingAmplitude, MetalFilmConfig, SweepConfig,
    PLATINUM_RESISTIVITY,
};
use crate::output::{config_hash, format_number, Report, Table};
use crate::physcore::{H_PLANCK, MU_B, RB87};
use crate::protocols::{
    cnot_input, cnot_inputs, cnot_schedule, cnot_space, cnot_target, drive_for_gate_time, entangle_schedule, run_cnot,
    run_entangle, run_schedule, DampingConvention, DecoherenceConfig,
};
use crate::trap::{
    casimir_polder, find_trap_minimum, linspace, optical_potential, retarded_c4_perfect_conductor, sample_curve,
    trap_frequency, LatticeConfig, PotentialTerms, RecoilConvention, SurfaceConfig, TrapContext,
};
use crate::zeeman::HyperfineState;

use std::f64::consts::PI;

/// Bundled configuration equal to the built-in defaults.
pub const PAPER_DEFAULTS_JSON: &str = include_str!("../configs/paper_defaults.json");
/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "HYBRIDSIM_THREADS";

const NM_PER_M: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub tip_size_nm: [f64; 3],
    pub compensation_size_nm: [f64; 3],
    pub compensation_gap_nm: f64,
    pub magnetization_a_per_m: f64,
    pub cantilever_count: usize,
    pub pitch_nm: f64,
    pub magnet_depth_nm: f64,
    pub trap_height_nm: f64,
    pub bias_y_ut: f64,
    pub bias_x_ut: Option<f64>,
    pub compensation_polarity: CompensationPolarity,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            tip_size_nm: [700.0, 200.0, 150.0],
            compensation_size_nm: [5100.0, 200.0, 150.0],
            compensation_gap_nm: 100.0,
            magnetization_a_per_m: 1e6,
            cantilever_count: 3,
            pitch_nm: 6000.0,
            magnet_depth_nm: 400.0,
            trap_height_nm: 375.0,
            bias_y_ut: 160.0,
            bias_x_ut: None,
            compensation_polarity: CompensationPolarity::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub lambda_eff_nm: f64,
    pub depth_er: f64,
    pub antinode_nm: f64,
    /// Laser wavelength for the recoil energy; `null` uses λ_eff.
    pub recoil_wavelength_nm: Option<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { lambda_eff_nm: 1500.0, depth_er: 500.0, antinode_nm: 375.0, recoil_wavelength_nm: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    /// `null` derives C₄ from the polarisability for a perfect conductor.
    pub c4_j_m4: Option<f64>,
    pub polarizability_au: f64,
    pub membrane_thickness_nm: f64,
    pub temperature_k: f64,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { c4_j_m4: None, polarizability_au: 318.8, membrane_thickness_nm: 150.0, temperature_k: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomSection {
    pub gravity_sign: f64,
    pub nuclear_g_factor: bool,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self { gravity_sign: -1.0, nuclear_g_factor: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CantileverSection {
    pub length_um: f64,
    pub width_um: f64,
    pub thickness_um: f64,
    pub si_density_kg_m3: f64,
    pub magnet_density_kg_m3: f64,
    pub spring_k_n_per_m: f64,
    pub frequency_mhz: f64,
    pub q: f64,
    pub temperature_mk: f64,
    /// κ/2π; `null` uses ω_c/(2Q).
    pub kappa_hz: Option<f64>,
}

impl Default for CantileverSection {
    fn default() -> Self {
        Self {
            length_um: 8.0,
            width_um: 0.2,
            thickness_um: 0.1,
            si_density_kg_m3: 2330.0,
            magnet_density_kg_m3: 8900.0,
            spring_k_n_per_m: 0.012,
            frequency_mhz: 1.1,
            q: 3e5,
            temperature_mk: 10.0,
            kappa_hz: Some(1.8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilmSection {
    pub resistivity_ohm_m: f64,
    pub thickness_nm: f64,
    pub temperature_k: f64,
}

impl Default for FilmSection {
    fn default() -> Self {
        Self { resistivity_ohm_m: PLATINUM_RESISTIVITY, thickness_nm: 30.0, temperature_k: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub dmu_parallel_mu_b: f64,
    pub delta_b_bias_nt: f64,
    pub bias_bandwidth_hz: f64,
    pub gamma_vac_hz: f64,
    pub heating_amplitude: HeatingAmplitude,
    pub trapped_state: String,
    pub spin_flip_state: String,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            dmu_parallel_mu_b: 0.5,
            delta_b_bias_nt: 0.1,
            bias_bandwidth_hz: 12.5,
            gamma_vac_hz: 0.05,
            heating_amplitude: HeatingAmplitude::Atom,
            trapped_state: "2,1".into(),
            spin_flip_state: "2,2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    /// `null` derives g_eff from the chip geometry.
    pub g_eff_hz: Option<f64>,
    pub gate_time_ms: f64,
    pub fock_cutoff: usize,
    pub thermal_occupation: f64,
    pub dephasing_hz: f64,
    pub spin_flip_hz: f64,
    pub damping_convention: DampingConvention,
    pub kappa_sweep_hz: Vec<f64>,
    pub trajectory_samples: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            g_eff_hz: Some(12.7),
            gate_time_ms: 80.0,
            fock_cutoff: 3,
            thermal_occupation: 0.0,
            dephasing_hz: 0.0,
            spin_flip_hz: 0.0,
            damping_convention: DampingConvention::CoherenceTime,
            kappa_sweep_hz: vec![0.0, 0.45, 0.9, 1.8, 3.6],
            trajectory_samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub detection_q: f64,
    pub detection_temperature_mk: f64,
    pub bandwidth_hz: f64,
    /// Magnet-centre to atom distance for the spin-force estimate.
    pub force_distance_nm: f64,
    pub phonon_rabi_hz: f64,
    pub phonon_q: f64,
    pub phonon_frequency_mhz: f64,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            detection_q: 1e5,
            detection_temperature_mk: 10.0,
            bandwidth_hz: 4.0,
            force_distance_nm: 400.0,
            phonon_rabi_hz: 10.0,
            phonon_q: 1e5,
            phonon_frequency_mhz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub z_min_nm: f64,
    pub z_max_nm: f64,
    pub points: usize,
    pub states: Vec<String>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { z_min_nm: 50.0, z_max_nm: 1200.0, points: 576, states: vec!["2,2".into(), "2,1".into(), "1,-1".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub d_min_nm: f64,
    pub d_max_nm: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { d_min_nm: 100.0, d_max_nm: 800.0, points: 71 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub lattice: LatticeSection,
    pub surface: SurfaceSection,
    pub atom: AtomSection,
    pub cantilevers: Vec<CantileverSection>,
    pub film: FilmSection,
    pub noise: NoiseSection,
    pub protocol: ProtocolSection,
    pub sensitivity: SensitivitySection,
    pub potential: PotentialSection,
    pub sweep: SweepSection,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometrySection::default(),
            lattice: LatticeSection::default(),
            surface: SurfaceSection::default(),
            atom: AtomSection::default(),
            cantilevers: vec![CantileverSection::default(), CantileverSection::default()],
            film: FilmSection::default(),
            noise: NoiseSection::default(),
            protocol: ProtocolSection::default(),
            sensitivity: SensitivitySection::default(),
            potential: PotentialSection::default(),
            sweep: SweepSection::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require_positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(cfg_err(format!("{key} must be positive, got {v}")));
    }
    Ok(())
}

fn require_non_negative(key: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(cfg_err(format!("{key} must be non-negative, got {v}")));
    }
    Ok(())
}

fn parse_state(key: &str, s: &str) -> Result<HyperfineState> {
    s.parse::<HyperfineState>().map_err(|e| cfg_err(format!("{key}: {e}")))
}

impl RunConfig {
    pub fn paper_defaults() -> Result<Self> {
        Self::from_json(PAPER_DEFAULTS_JSON)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| cfg_err(format!("invalid configuration: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => cfg_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration always serialises")
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical_json())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (i, v) in g.tip_size_nm.iter().enumerate() {
            require_positive(&format!("geometry.tip_size_nm[{i}]"), *v)?;
        }
        for (i, v) in g.compensation_size_nm.iter().enumerate() {
            require_positive(&format!("geometry.compensation_size_nm[{i}]"), *v)?;
        }
        require_non_negative("geometry.compensation_gap_nm", g.compensation_gap_nm)?;
        require_positive("geometry.pitch_nm", g.pitch_nm)?;
        require_positive("geometry.trap_height_nm", g.trap_height_nm)?;
        require_positive("geometry.magnet_depth_nm", g.magnet_depth_nm)?;
        if !g.magnetization_a_per_m.is_finite() || !g.bias_y_ut.is_finite() {
            return Err(cfg_err("geometry magnetisation and bias must be finite"));
        }
        if g.cantilever_count == 0 {
            return Err(cfg_err("geometry.cantilever_count must be at least 1"));
        }
        if g.magnet_depth_nm <= g.tip_size_nm[2] / 2.0 {
            return Err(cfg_err("geometry.magnet_depth_nm puts the tip magnet through the surface"));
        }
        let l = &self.lattice;
        require_positive("lattice.lambda_eff_nm", l.lambda_eff_nm)?;
        require_positive("lattice.depth_er", l.depth_er)?;
        require_positive("lattice.antinode_nm", l.antinode_nm)?;
        if let Some(w) = l.recoil_wavelength_nm {
            require_positive("lattice.recoil_wavelength_nm", w)?;
        }
        let s = &self.surface;
        if let Some(c4) = s.c4_j_m4 {
            require_non_negative("surface.c4_j_m4", c4)?;
        }
        require_non_negative("surface.polarizability_au", s.polarizability_au)?;
        require_non_negative("surface.temperature_k", s.temperature_k)?;
        if self.atom.gravity_sign.abs() != 1.0 {
            return Err(cfg_err("atom.gravity_sign must be +1 or -1"));
        }
        if self.cantilevers.is_empty() {
            return Err(cfg_err("cantilevers: at least one cantilever is required"));
        }
        for (i, c) in self.cantilevers.iter().enumerate() {
            let k = |n: &str| format!("cantilevers[{i}].{n}");
            require_positive(&k("length_um"), c.length_um)?;
            require_positive(&k("width_um"), c.width_um)?;
            require_positive(&k("thickness_um"), c.thickness_um)?;
            require_non_negative(&k("si_density_kg_m3"), c.si_density_kg_m3)?;
            require_non_negative(&k("magnet_density_kg_m3"), c.magnet_density_kg_m3)?;
            require_positive(&k("spring_k_n_per_m"), c.spring_k_n_per_m)?;
            require_positive(&k("frequency_mhz"), c.frequency_mhz)?;
            require_positive(&k("q"), c.q)?;
            require_non_negative(&k("temperature_mk"), c.temperature_mk)?;
            if let Some(kappa) = c.kappa_hz {
                require_non_negative(&k("kappa_hz"), kappa)?;
            }
        }
        let f = &self.film;
        require_positive("film.resistivity_ohm_m", f.resistivity_ohm_m)?;
        require_positive("film.thickness_nm", f.thickness_nm)?;
        require_non_negative("film.temperature_k", f.temperature_k)?;
        let n = &self.noise;
        require_non_negative("noise.dmu_parallel_mu_b", n.dmu_parallel_mu_b)?;
        require_non_negative("noise.delta_b_bias_nt", n.delta_b_bias_nt)?;
        require_positive("noise.bias_bandwidth_hz", n.bias_bandwidth_hz)?;
        require_non_negative("noise.gamma_vac_hz", n.gamma_vac_hz)?;
        parse_state("noise.trapped_state", &n.trapped_state)?;
        parse_state("noise.spin_flip_state", &n.spin_flip_state)?;
        let p = &self.protocol;
        if let Some(g) = p.g_eff_hz {
            require_positive("protocol.g_eff_hz", g)?;
        }
        require_positive("protocol.gate_time_ms", p.gate_time_ms)?;
        if p.fock_cutoff < crate::dynamics::MIN_CUTOFF {
            return Err(cfg_err(format!("protocol.fock_cutoff must be at least {}", crate::dynamics::MIN_CUTOFF)));
        }
        require_non_negative("protocol.thermal_occupation", p.thermal_occupation)?;
        require_non_negative("protocol.dephasing_hz", p.dephasing_hz)?;
        require_non_negative("protocol.spin_flip_hz", p.spin_flip_hz)?;
        for (i, k) in p.kappa_sweep_hz.iter().enumerate() {
            require_non_negative(&format!("protocol.kappa_sweep_hz[{i}]"), *k)?;
        }
        if p.kappa_sweep_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg_err("protocol.kappa_sweep_hz must be strictly ascending"));
        }
        let se = &self.sensitivity;
        require_positive("sensitivity.detection_q", se.detection_q)?;
        require_non_negative("sensitivity.detection_temperature_mk", se.detection_temperature_mk)?;
        require_positive("sensitivity.bandwidth_hz", se.bandwidth_hz)?;
        require_positive("sensitivity.force_distance_nm", se.force_distance_nm)?;
        require_positive("sensitivity.phonon_rabi_hz", se.phonon_rabi_hz)?;
        require_positive("sensitivity.phonon_q", se.phonon_q)?;
        require_positive("sensitivity.phonon_frequency_mhz", se.phonon_frequency_mhz)?;
        let po = &self.potential;
        require_positive("potential.z_min_nm", po.z_min_nm)?;
        if !(po.z_max_nm > po.z_min_nm) || po.points < 2 {
            return Err(cfg_err("potential: need z_max_nm > z_min_nm and at least 2 points"));
        }
        for (i, s) in po.states.iter().enumerate() {
            parse_state(&format!("potential.states[{i}]"), s)?;
        }
        let sw = &self.sweep;
        require_positive("sweep.d_min_nm", sw.d_min_nm)?;
        if !(sw.d_max_nm > sw.d_min_nm) || sw.points < 2 {
            return Err(cfg_err("sweep: need d_max_nm > d_min_nm and at least 2 points"));
        }
        Ok(())
    }

    pub fn chip_geometry(&self) -> ChipGeometry {
        let g = &self.geometry;
        let v = |a: [f64; 3]| Vector3::new(a[0] / NM_PER_M, a[1] / NM_PER_M, a[2] / NM_PER_M);
        ChipGeometry {
            tip_size: v(g.tip_size_nm),
            compensation_size: v(g.compensation_size_nm),
            compensation_gap: g.compensation_gap_nm / NM_PER_M,
            magnetization: g.magnetization_a_per_m,
            cantilever_count: g.cantilever_count,
            pitch: g.pitch_nm / NM_PER_M,
            magnet_depth: g.magnet_depth_nm / NM_PER_M,
            trap_height: g.trap_height_nm / NM_PER_M,
            bias_y: g.bias_y_ut / 1e6,
            bias_x: g.bias_x_ut.map(|b| b / 1e6),
            polarity: g.compensation_polarity,
        }
    }

    pub fn lattice_config(&self) -> LatticeConfig {
        let l = &self.lattice;
        LatticeConfig {
            lambda_eff: l.lambda_eff_nm / NM_PER_M,
            depth_er: l.depth_er,
            antinode: l.antinode_nm / NM_PER_M,
            recoil: match l.recoil_wavelength_nm {
                Some(w) => RecoilConvention::LaserWavelength(w / NM_PER_M),
                None => RecoilConvention::LambdaEff,
            },
        }
    }

    pub fn surface_config(&self) -> SurfaceConfig {
        let s = &self.surface;
        SurfaceConfig {
            c4: s.c4_j_m4.unwrap_or_else(|| retarded_c4_perfect_conductor(s.polarizability_au)),
            membrane_thickness: s.membrane_thickness_nm / NM_PER_M,
            temperature: s.temperature_k,
        }
    }

    pub fn species(&self) -> crate::physcore::AtomSpecies {
        if self.atom.nuclear_g_factor {
            RB87
        } else {
            RB87.without_nuclear_g()
        }
    }

    pub fn cantilever_config(&self, index: usize) -> Result<CantileverConfig> {
        let c = self.cantilevers.get(index).ok_or_else(|| cfg_err(format!("cantilevers[{index}] is missing")))?;
        let tip = self.chip_geometry().tip_size;
        Ok(CantileverConfig {
            length_m: c.length_um / 1e6,
            width_m: c.width_um / 1e6,
            thickness_m: c.thickness_um / 1e6,
            si_density_kg_m3: c.si_density_kg_m3,
            magnet_mass_kg: c.magnet_density_kg_m3 * tip.x * tip.y * tip.z,
            spring_k_n_per_m: c.spring_k_n_per_m,
            omega_c_rad_s: 2.0 * PI * c.frequency_mhz * 1e6,
            q: c.q,
            temperature_k: c.temperature_mk / 1e3,
        })
    }

    /// κ/2π of cantilever `index`.
    pub fn kappa_hz(&self, index: usize) -> Result<f64> {
        let c = self.cantilever_config(index)?;
        Ok(self.cantilevers[index].kappa_hz.unwrap_or_else(|| c.kappa_hz()))
    }

    pub fn film_config(&self) -> MetalFilmConfig {
        MetalFilmConfig {
            conductivity_s_per_m: 1.0 / self.film.resistivity_ohm_m,
            thickness_m: self.film.thickness_nm / NM_PER_M,
            temperature_k: self.film.temperature_k,
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let n = &self.noise;
        Ok(SweepConfig {
            species: self.species(),
            geometry: self.chip_geometry(),
            cantilever: self.cantilever_config(0)?,
            film: self.film_config(),
            lattice: self.lattice_config(),
            trapped_state: parse_state("noise.trapped_state", &n.trapped_state)?,
            spin_flip_state: parse_state("noise.spin_flip_state", &n.spin_flip_state)?,
            dmu_parallel: n.dmu_parallel_mu_b * MU_B,
            delta_b_bias: n.delta_b_bias_nt / 1e9,
            bias_bandwidth_hz: n.bias_bandwidth_hz,
            gamma_vac_hz: n.gamma_vac_hz,
            heating_amplitude: n.heating_amplitude,
        })
    }

    /// Coupling (rad/s) used by the protocols.
    pub fn g_eff(&self) -> Result<f64> {
        match self.protocol.g_eff_hz {
            Some(g) => Ok(2.0 * PI * g),
            None => {
                let sweep = self.sweep_config()?;
                let (g_m, _) = sweep.coupling_gradient(self.chip_geometry().trap_height)?;
                Ok(2.0 * PI * g_eff_coupling(g_m, zero_point_amplitude(&sweep.cantilever)))
            }
        }
    }

    /// Noise model for a run over `modes` cantilevers.
    pub fn decoherence(&self, modes: usize, lossless: bool) -> Result<DecoherenceConfig> {
        if lossless {
            return Ok(DecoherenceConfig::lossless());
        }
        let p = &self.protocol;
        Ok(DecoherenceConfig {
            kappa_hz: (0..modes).map(|k| self.kappa_hz(k)).collect::<Result<_>>()?,
            thermal_occupation: p.thermal_occupation,
            dephasing_hz: p.dephasing_hz,
            spin_flip_hz: p.spin_flip_hz,
            convention: p.damping_convention,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "hybridsim", version, about = "Cold atoms coupled to magnetic micro-cantilevers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Use the bundled reference configuration.
    #[arg(long, conflicts_with = "config")]
    pub paper_defaults: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Potential curves and their components for each hyperfine state.
    Potential {
        #[command(flatten)]
        common: CommonArgs,
        /// States as `F,mF`, e.g. `--states 2,1 2,2`.
        #[arg(long, num_args = 1..)]
        states: Vec<String>,
    },
    /// Coupling and decoherence rates versus atom–surface distance.
    Rates {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Phonon-controlled CNOT on the four basis inputs.
    Gate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        lossless: bool,
        /// Also write a trajectory CSV per input.
        #[arg(long)]
        trajectories: bool,
    },
    /// Two-cantilever entangling sequence.
    Entangle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        lossless: bool,
        /// Repeat for every κ in `protocol.kappa_sweep_hz`.
        #[arg(long)]
        kappa_sweep: bool,
    },
    /// Force sensitivity, phonon bound and coupling estimates.
    Sensitivity {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the built-in default configuration.
    Defaults,
}

impl CommonArgs {
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let cfg = match (&self.config, self.paper_defaults) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, true) => RunConfig::paper_defaults()?,
            (None, false) => return Err(cfg_err("pass --config FILE or --paper-defaults")),
        };
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok((cfg, out))
    }
}

fn khz(energy: f64) -> f64 {
    energy / H_PLANCK / 1e3
}

pub fn cmd_potential(cfg: &RunConfig, out: &Path, states: &[String]) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let names: Vec<String> = if states.is_empty() { cfg.potential.states.clone() } else { states.to_vec() };
    let states = names.iter().map(|s| parse_state("--states", s)).collect::<Result<Vec<_>>>()?;
    let geometry = cfg.chip_geometry();
    let assembly = geometry.assembly()?;
    let p = geometry.trap_point();
    let po = &cfg.potential;
    let grid = linspace(po.z_min_nm / NM_PER_M, po.z_max_nm / NM_PER_M, po.points);
    let mut written = Vec::new();
    let mut summary = Report::default();
    for s in states {
        let mut ctx = TrapContext::new(cfg.species(), s, assembly.clone(), cfg.lattice_config(), cfg.surface_config());
        ctx.lateral = (p.x, p.y);
        ctx.gravity_sign = cfg.atom.gravity_sign;
        let total = sample_curve(&ctx, &grid, |c, z| c.total_potential(z))?;
        let optical = sample_curve(&ctx, &grid, |c, z| Ok(optical_potential(&c.species, z, &c.lattice)))?;
        let cp = sample_curve(&ctx, &grid, |c, z| casimir_polder(z, &c.surface))?;
        let gravity = sample_curve(&ctx, &grid, |c, z| Ok(c.gravity_term(z)))?;
        let magnetic = sample_curve(&ctx, &grid, |c, z| c.magnetic_term(z))?;

        let mut t = Table::new(["z_nm", "u_total_khz"]);
        let mut comp =
            Table::new(["z_nm", "optical_khz", "casimir_polder_khz", "gravity_khz", "magnetic_khz", "total_khz"]);
        for (i, &z) in grid.iter().enumerate() {
            let z = z * NM_PER_M;
            t.push_numbers(&[z, khz(total.u[i])]);
            comp.push_numbers(&[
                z,
                khz(optical.u[i]),
                khz(cp.u[i]),
                khz(gravity.u[i]),
                khz(magnetic.u[i]),
                khz(total.u[i]),
            ]);
        }
        let tag = s.tag();
        for (name, table) in [(format!("potential_{tag}.csv"), &t), (format!("components_{tag}.csv"), &comp)] {
            let path = out.join(name);
            table.write(&path, &hash)?;
            written.push(path);
        }
        match find_trap_minimum(&ctx, ctx.default_bracket()) {
            Ok(z) => {
                summary.number(&format!("{tag}.z_min_nm"), z * NM_PER_M);
                summary.number(&format!("{tag}.trap_frequency_khz"), trap_frequency(&ctx, z)? / (2.0 * PI) / 1e3);
                summary.number(&format!("{tag}.barrier_khz"), khz(ctx.barrier()?));
                let no_mag = ctx.clone().with_terms(PotentialTerms { magnetic: false, ..PotentialTerms::ALL });
                if let Ok(b) = no_mag.barrier() {
                    summary.number(&format!("{tag}.barrier_without_magnets_khz"), khz(b));
                }
            }
            Err(_) => {
                summary.add(&format!("{tag}.z_min_nm"), "none");
            }
        }
    }
    let path = out.join("potential_summary.txt");
    summary.write(&path, &hash)?;
    print!("{}", summary.render(&hash));
    written.push(path);
    Ok(written)
}

pub fn cmd_rates(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let sw = &cfg.sweep;
    let ds = linspace(sw.d_min_nm / NM_PER_M, sw.d_max_nm / NM_PER_M, sw.points);
    let budgets = rate_sweep(&cfg.sweep_config()?, &ds)?;
    let mut t = Table::new([
        "d_nm",
        "g_eff_hz",
        "gamma_spinflip_hz",
        "gamma_dephase_surface_hz",
        "gamma_dephase_bias_hz",
        "gamma_heat_surface_hz",
        "gamma_heat_bias_hz",
        "gamma_vac_hz",
        "kappa_hz",
        "ratio_without_kappa",
        "ratio_with_kappa",
    ]);
    for b in &budgets {
        t.push_numbers(&[
            b.d * NM_PER_M,
            b.g_eff_hz,
            b.gamma_spinflip_hz,
            b.gamma_dephase_surface_hz,
            b.gamma_dephase_bias_hz,
            b.gamma_heat_surface_hz,
            b.gamma_heat_bias_hz,
            b.gamma_vac_hz,
            b.kappa_hz,
            b.coupling_ratio(false),
            b.coupling_ratio(true),
        ]);
    }
    let path = out.join("rates.csv");
    t.write(&path, &hash)?;
    let mut r = Report::default();
    for k in [false, true] {
        if let Some(d) = crate::noise::best_distance(&budgets, k) {
            r.number(if k { "best_d_with_kappa_nm" } else { "best_d_without_kappa_nm" }, d * NM_PER_M);
        }
    }
    print!("{}", r.render(&hash));
    Ok(vec![path])
}

pub fn cmd_gate(cfg: &RunConfig, out: &Path, lossless: bool, trajectories: bool) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let g = cfg.g_eff()?;
    let omega = drive_for_gate_time(g, cfg.protocol.gate_time_ms / 1e3)?;
    let schedule = cnot_schedule(g, omega)?;
    let noise = cfg.decoherence(1, lossless)?;
    let opts = EvolveOptions::default();
    let cutoff = cfg.protocol.fock_cutoff;
    let result = run_cnot(&schedule, cutoff, &noise, &opts)?;

    let mut table = Table::new(["input", "target", "fidelity"]);
    for row in &result.rows {
        table.push(vec![row.input.clone(), row.target.clone(), format_number(row.fidelity)]);
    }
    let mut written = vec![out.join("gate_truth_table.csv")];
    table.write(&written[0], &hash)?;

    let mut r = Report::default();
    r.number("g_eff_hz", g / (2.0 * PI))
        .number("drive_rabi_rad_s", omega)
        .number("gate_time_s", result.gate_time)
        .add("lossless", lossless)
        .number("kappa_hz", if lossless { 0.0 } else { noise.kappa_for(0) })
        .add("damping_convention", format!("{:?}", noise.convention));
    for row in &result.rows {
        r.number(&format!("fidelity.{}", row.input), row.fidelity);
    }
    r.number("mean_fidelity", result.mean_fidelity)
        .number("min_fidelity", result.min_fidelity)
        .number("max_trace_error", result.hygiene.max_trace_error)
        .number("min_eigenvalue", result.hygiene.min_eigenvalue);
    let path = out.join("gate_report.txt");
    r.write(&path, &hash)?;
    print!("{}", r.render(&hash));
    written.push(path);

    if trajectories {
        let space = cnot_space(cutoff)?;
        let traj_opts = EvolveOptions { samples_per_segment: cfg.protocol.trajectory_samples, ..opts };
        for (k, (s, n)) in cnot_inputs().iter().enumerate() {
            let mut amp = [num_complex::Complex64::new(0.0, 0.0); 4];
            amp[k] = num_complex::Complex64::new(1.0, 0.0);
            let input = cnot_input(&space, &amp)?;
            let target = cnot_target(&space, &amp)?;
            let traj = run_schedule(&space, &schedule, &input, &noise, &traj_opts)?;
            let (header, rows) = trajectory_table(&space, &traj, Some(&target))?;
            let mut t = Table::new(header);
            for row in rows {
                t.push_numbers(&row);
            }
            let path = out.join(format!("gate_trajectory_{}{n}.csv", s.label().unwrap_or("x")));
            t.write(&path, &hash)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn cmd_entangle(cfg: &RunConfig, out: &Path, lossless: bool, kappa_sweep: bool) -> Result<Vec<PathBuf>> {
    if cfg.cantilevers.len() < 2 {
        return Err(cfg_err("entangle needs two entries in `cantilevers`"));
    }
    let hash = cfg.hash();
    let g = cfg.g_eff()?;
    let schedule = entangle_schedule(g, g)?;
    let noise = cfg.decoherence(2, lossless)?;
    let opts = EvolveOptions::default();
    let cutoff = cfg.protocol.fock_cutoff;
    let res = run_entangle(&schedule, cutoff, &noise, &opts)?;

    let mut r = Report::default();
    r.number("g_eff_hz", g / (2.0 * PI))
        .number("total_time_s", schedule.total_duration())
        .add("lossless", lossless)
        .number("kappa1_hz", noise.kappa_for(0))
        .number("kappa2_hz", noise.kappa_for(1))
        .number("bell_fidelity", res.bell_fidelity)
        .number("concurrence", res.concurrence)
        .number("atom_purity", res.atom_purity)
        .number("atom_up_population", res.atom_up_population)
        .number("max_trace_error", res.hygiene.max_trace_error)
        .number("min_eigenvalue", res.hygiene.min_eigenvalue);
    let mut written = Vec::new();
    let path = out.join("entangle_report.txt");
    r.write(&path, &hash)?;
    print!("{}", r.render(&hash));
    written.push(path);

    let rho = res.modes.density();
    let d2 = cutoff + 1;
    let mut dump = Table::new(["n1_row", "n2_row", "n1_col", "n2_col", "re", "im"]);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            let v = rho[(i, j)];
            if v.norm() > 0.0 {
                dump.push(vec![
                    (i / d2).to_string(),
                    (i % d2).to_string(),
                    (j / d2).to_string(),
                    (j % d2).to_string(),
                    format_number(v.re),
                    format_number(v.im),
                ]);
            }
        }
    }
    let path = out.join("entangle_modes.csv");
    dump.write(&path, &hash)?;
    written.push(path);

    if kappa_sweep {
        use rayon::prelude::*;
        let rows = cfg
            .protocol
            .kappa_sweep_hz
            .par_iter()
            .map(|&k| {
                let n = DecoherenceConfig { kappa_hz: vec![k, k], ..noise.clone() };
                run_entangle(&schedule, cutoff, &n, &opts).map(|e| [k, e.bell_fidelity, e.concurrence])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(["kappa_hz", "bell_fidelity", "concurrence"]);
        for row in rows {
            t.push_numbers(&row);
        }
        let path = out.join("entangle_kappa_sweep.csv");
        t.write(&path, &hash)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_sensitivity(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let se = &cfg.sensitivity;
    let base = cfg.cantilever_config(0)?;
    let detection = CantileverConfig { q: se.detection_q, temperature_k: se.detection_temperature_mk / 1e3, ..base };
    let geometry = cfg.chip_geometry();
    let g_force = isolated_tip_gradient(&geometry, se.force_distance_nm / NM_PER_M)?;
    let sweep = cfg.sweep_config()?;
    let (g_op, _) = sweep.coupling_gradient(geometry.trap_height)?;
    let z_qm = zero_point_amplitude(&base);
    let mut r = Report::default();
    r.number("beam_mass_kg", base.beam_mass())
        .number("effective_mass_kg", base.effective_mass())
        .number("z_qm_m", z_qm)
        .number("f_min_n", min_detectable_force(&detection, se.bandwidth_hz))
        .number("gradient_at_force_distance_t_per_m", g_force)
        .number("f_s_n", spin_precession_force(g_force))
        .number(
            "n_th_bound",
            max_thermal_occupation(2.0 * PI * se.phonon_rabi_hz, se.phonon_q, 2.0 * PI * se.phonon_frequency_mhz * 1e6),
        )
        .number("g_m_operating_t_per_m", g_op)
        .number("g_eff_hz", g_eff_coupling(g_op, z_qm))
        .number("kappa_hz", cfg.kappa_hz(0)?);
    let path = out.join("sensitivity_report.txt");
    r.write(&path, &hash)?;
    print!("{}", r.render(&hash));
    Ok(vec![path])
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Runs the CLI and returns the process exit code: 0 success, 2 bad
/// configuration, 3 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Defaults => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("serialisable"));
            Ok(Vec::new())
        }
        Command::Potential { common, states } => common.resolve().and_then(|(c, o)| cmd_potential(&c, &o, states)),
        Command::Rates { common } => common.resolve().and_then(|(c, o)| cmd_rates(&c, &o)),
        Command::Gate { common, lossless, trajectories } => {
            common.resolve().and_then(|(c, o)| cmd_gate(&c, &o, *lossless, *trajectories))
        }
        Command::Entangle { common, lossless, kappa_sweep } => {
            common.resolve().and_then(|(c, o)| cmd_entangle(&c, &o, *lossless, *kappa_sweep))
        }
        Command::Sensitivity { common } => common.resolve().and_then(|(c, o)| cmd_sensitivity(&c, &o)),
    };
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                3
            }
        }
    }
}
