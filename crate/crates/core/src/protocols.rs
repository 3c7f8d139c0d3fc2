//! Pulse schedules for the phonon-controlled CNOT and the two-cantilever
//! entangling sequence, the noise model used to run them, and gate analysis.
//!
//! Pulse areas: the `|aux,0⟩ ↔ |↑,1⟩` transfer probability is `sin²(g t)`,
//! so a "π/2 pulse" is `g t = π/4`, a "π pulse" `g t = π/2` and a
//! "2π pulse" `g t = π`.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use crate::dynamics::{
    build_drive_hamiltonian, build_jc_hamiltonian, evolve, fidelity, partial_trace, psd_sqrt, EvolveOptions,
    HilbertSpace, Hygiene, LindbladTerm, OperatorMatrix, QuantumState, Segment, Trajectory,
};
use crate::error::{Error, Result};
use crate::magnetostatics::{assembly_field, magnet_coupling_gradient, MagnetAssembly};
use crate::noise::RateBudget;
use crate::zeeman::HyperfineState;

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// JC exchange on `(lower, upper)` with `mode`, rotating frame.
    Jc {
        lower: HyperfineState,
        upper: HyperfineState,
        mode: usize,
        g: f64,
        detuning: f64,
    },
    /// Resonant two-level drive on `(down, up)`.
    Drive {
        down: HyperfineState,
        up: HyperfineState,
        omega: f64,
        phi: f64,
    },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSegment {
    pub duration: f64,
    pub hamiltonian: HamiltonianSpec,
    pub label: String,
}

/// The atom is moved over cantilever `mode` after segment `after_segment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeMove {
    pub after_segment: usize,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSchedule {
    pub segments: Vec<PulseSegment>,
    pub lattice_moves: Vec<LatticeMove>,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            if !(s.duration >= 0.0) {
                return Err(Error::Domain(format!("segment '{}' has duration {}", s.label, s.duration)));
            }
        }
        for m in &self.lattice_moves {
            if m.after_segment >= self.segments.len() {
                return Err(Error::InvalidSystem(format!(
                    "lattice move after segment {} but only {} segments",
                    m.after_segment,
                    self.segments.len()
                )));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        v.validate()?;
        Ok(v)
    }

    /// Schedule repeated `times` times back to back.
    pub fn repeated(&self, times: usize) -> Self {
        let n = self.segments.len();
        let mut out = Self::default();
        for k in 0..times {
            out.segments.extend(self.segments.iter().cloned());
            out.lattice_moves.extend(
                self.lattice_moves.iter().map(|m| LatticeMove { after_segment: m.after_segment + k * n, mode: m.mode }),
            );
        }
        out
    }

    /// Hamiltonians on `space`. Lattice moves need no action here: each
    /// JC segment already names the mode it couples to.
    pub fn compile(&self, space: &HilbertSpace) -> Result<Vec<Segment>> {
        self.validate()?;
        self.segments
            .iter()
            .map(|s| {
                let h = match s.hamiltonian {
                    HamiltonianSpec::Jc { lower, upper, mode, g, detuning } => {
                        build_jc_hamiltonian(space, (lower, upper), mode, g, detuning)?
                    }
                    HamiltonianSpec::Drive { down, up, omega, phi } => {
                        build_drive_hamiltonian(space, (down, up), omega, phi)?
                    }
                    HamiltonianSpec::Idle => OperatorMatrix::zeros(space.dim()),
                };
                Ok(Segment { hamiltonian: h, duration: s.duration, label: s.label.clone() })
            })
            .collect()
    }
}

/// How a rate quoted in Hz becomes a collapse rate (s⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingConvention {
    /// Collapse rate `1/τ` with `τ = 1/(rate in Hz)`; for the cantilever
    /// this is the coherence time `τ_c = 2π/κ`.
    CoherenceTime,
    /// Collapse rate equal to the angular rate, `2π × (rate in Hz)`.
    AngularRate,
}

impl DampingConvention {
    pub fn collapse_rate(self, rate_hz: f64) -> f64 {
        match self {
            Self::CoherenceTime => rate_hz,
            Self::AngularRate => 2.0 * PI * rate_hz,
        }
    }
}

/// Open-system model of a protocol run. Rates are in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoherenceConfig {
    /// κ/2π of each cantilever; missing entries reuse the last one.
    pub kappa_hz: Vec<f64>,
    pub thermal_occupation: f64,
    /// Coherence decay rate of the `{↑, aux}` pair.
    pub dephasing_hz: f64,
    /// Rate of each of `↑ → aux` and `aux → ↑`.
    pub spin_flip_hz: f64,
    pub convention: DampingConvention,
}

impl Default for DecoherenceConfig {
    fn default() -> Self {
        Self {
            kappa_hz: vec![1.8],
            thermal_occupation: 0.0,
            dephasing_hz: 0.0,
            spin_flip_hz: 0.0,
            convention: DampingConvention::CoherenceTime,
        }
    }
}

impl DecoherenceConfig {
    pub fn lossless() -> Self {
        Self { kappa_hz: vec![0.0], ..Self::default() }
    }

    pub fn cantilever_only(kappa_hz: f64) -> Self {
        Self { kappa_hz: vec![kappa_hz], ..Self::default() }
    }

    /// Cantilever damping plus the atomic rates of a noise budget.
    pub fn from_budget(b: &RateBudget) -> Self {
        Self {
            kappa_hz: vec![b.kappa_hz],
            dephasing_hz: b.gamma_dephase_bias_hz + b.gamma_dephase_surface_hz,
            spin_flip_hz: b.gamma_spinflip_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.kappa_hz.iter().chain([&self.thermal_occupation, &self.dephasing_hz, &self.spin_flip_hz]);
        if self.kappa_hz.is_empty() || all.into_iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Domain("decoherence rates must be non-negative and κ given".into()));
        }
        Ok(())
    }

    pub fn kappa_for(&self, mode: usize) -> f64 {
        *self.kappa_hz.get(mode).or(self.kappa_hz.last()).unwrap_or(&0.0)
    }

    /// Collapse operators on `space`; `pair = (↑, aux)`.
    pub fn terms(&self, space: &HilbertSpace, pair: (HyperfineState, HyperfineState)) -> Result<Vec<LindbladTerm>> {
        self.validate()?;
        let conv = self.convention;
        let nth = self.thermal_occupation;
        let mut out = Vec::new();
        for k in 0..space.n_modes() {
            let kappa = conv.collapse_rate(self.kappa_for(k));
            let a = space.annihilation(k)?;
            out.push(LindbladTerm::new(a.clone(), kappa * (nth + 1.0), format!("damping_mode{k}"))?);
            if nth > 0.0 {
                out.push(LindbladTerm::new(a.adjoint(), kappa * nth, format!("heating_mode{k}"))?);
            }
        }
        let (up, aux) = pair;
        if self.dephasing_hz > 0.0 {
            let sz = space.projector(aux)? - space.projector(up)?;
            // γ D[σ_z] damps the pair coherence at 2γ
            out.push(LindbladTerm::new(sz, 0.5 * conv.collapse_rate(self.dephasing_hz), "dephasing")?);
        }
        if self.spin_flip_hz > 0.0 {
            let rate = conv.collapse_rate(self.spin_flip_hz);
            out.push(LindbladTerm::new(space.transition(aux, up)?, rate, "spin_flip_up")?);
            out.push(LindbladTerm::new(space.transition(up, aux)?, rate, "spin_flip_down")?);
        }
        Ok(out)
    }
}

/// Levels used by both protocols, in basis order.
pub fn protocol_levels() -> [HyperfineState; 3] {
    [HyperfineState::down(), HyperfineState::up(), HyperfineState::aux()]
}

pub fn run_schedule(
    space: &HilbertSpace,
    schedule: &PulseSchedule,
    initial: &QuantumState,
    noise: &DecoherenceConfig,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let segments = schedule.compile(space)?;
    let terms = noise.terms(space, (HyperfineState::up(), HyperfineState::aux()))?;
    evolve(initial, &segments, &terms, opts)
}

/// π/2 drive, 2π JC pulse on `(↑, aux)` with mode 0, then the inverse drive.
pub fn cnot_schedule(g_eff: f64, omega_drive: f64) -> Result<PulseSchedule> {
    if !(g_eff > 0.0 && omega_drive > 0.0) {
        return Err(Error::Domain("g_eff and Ω must be positive".into()));
    }
    let (down, up, aux) = (HyperfineState::down(), HyperfineState::up(), HyperfineState::aux());
    let t_drive = PI / (2.0 * omega_drive);
    Ok(PulseSchedule {
        segments: vec![
            PulseSegment {
                duration: t_drive,
                hamiltonian: HamiltonianSpec::Drive { down, up, omega: omega_drive, phi: PI / 2.0 },
                label: "drive_pi_half".into(),
            },
            PulseSegment {
                duration: PI / g_eff,
                hamiltonian: HamiltonianSpec::Jc { lower: up, upper: aux, mode: 0, g: g_eff, detuning: 0.0 },
                label: "jc_2pi".into(),
            },
            PulseSegment {
                duration: t_drive,
                hamiltonian: HamiltonianSpec::Drive { down, up, omega: omega_drive, phi: -PI / 2.0 },
                label: "drive_minus_pi_half".into(),
            },
        ],
        lattice_moves: Vec::new(),
    })
}

/// Drive Rabi frequency for which the whole gate lasts `gate_time`.
pub fn drive_for_gate_time(g_eff: f64, gate_time: f64) -> Result<f64> {
    let t_jc = PI / g_eff;
    if !(gate_time > t_jc) {
        return Err(Error::Domain(format!("gate time {gate_time} s does not exceed the 2π pulse ({t_jc} s)")));
    }
    Ok(PI / (gate_time - t_jc))
}

/// The four computational basis inputs `(spin, phonons)` in order
/// `|↓0⟩, |↓1⟩, |↑0⟩, |↑1⟩`.
pub fn cnot_inputs() -> [(HyperfineState, usize); 4] {
    let (d, u) = (HyperfineState::down(), HyperfineState::up());
    [(d, 0), (d, 1), (u, 0), (u, 1)]
}

/// Ideal output of each basis input: `(spin, phonons, sign)`.
/// With no phonon the spin is untouched; with one phonon it is flipped and
/// picks up a minus sign.
pub fn cnot_truth_table() -> [(HyperfineState, usize, f64); 4] {
    let (d, u) = (HyperfineState::down(), HyperfineState::up());
    [(d, 0, 1.0), (u, 1, -1.0), (u, 0, 1.0), (d, 1, -1.0)]
}

fn basis_label(s: HyperfineState, n: usize) -> String {
    format!("{}{n}", s.label().unwrap_or("?"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTableRow {
    pub input: String,
    pub target: String,
    pub fidelity: f64,
    pub output: QuantumState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateResult {
    pub rows: Vec<TruthTableRow>,
    pub mean_fidelity: f64,
    pub min_fidelity: f64,
    pub gate_time: f64,
    pub hygiene: Hygiene,
}

/// Ideal CNOT output for an arbitrary input given as amplitudes on the four
/// basis inputs.
pub fn cnot_target(space: &HilbertSpace, amplitudes: &[C64; 4]) -> Result<QuantumState> {
    let mut v = DVector::from_element(space.dim(), C64::new(0.0, 0.0));
    let mode_zeros = vec![0; space.n_modes() - 1];
    for (&c, &(s, n, sign)) in amplitudes.iter().zip(cnot_truth_table().iter()) {
        let mut fock = vec![n];
        fock.extend(&mode_zeros);
        v[space.basis_index(s, &fock)?] += c * sign;
    }
    QuantumState::from_amplitudes(v)
}

/// Superposition of the basis inputs with the given amplitudes.
pub fn cnot_input(space: &HilbertSpace, amplitudes: &[C64; 4]) -> Result<QuantumState> {
    let mut v = DVector::from_element(space.dim(), C64::new(0.0, 0.0));
    let mode_zeros = vec![0; space.n_modes() - 1];
    for (&c, &(s, n)) in amplitudes.iter().zip(cnot_inputs().iter()) {
        let mut fock = vec![n];
        fock.extend(&mode_zeros);
        v[space.basis_index(s, &fock)?] += c;
    }
    QuantumState::from_amplitudes(v)
}

pub fn cnot_space(cutoff: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(&protocol_levels(), &[cutoff])
}

/// Evolves the four basis inputs in parallel and scores them against the
/// ideal truth table.
pub fn run_cnot(
    schedule: &PulseSchedule,
    cutoff: usize,
    noise: &DecoherenceConfig,
    opts: &EvolveOptions,
) -> Result<GateResult> {
    let space = cnot_space(cutoff)?;
    let rows = (0..4)
        .into_par_iter()
        .map(|k| {
            let mut amp = [C64::new(0.0, 0.0); 4];
            amp[k] = C64::new(1.0, 0.0);
            let input = cnot_input(&space, &amp)?;
            let target = cnot_target(&space, &amp)?;
            let traj = run_schedule(&space, schedule, &input, noise, opts)?;
            let out = traj.final_state().clone();
            let (s, n) = cnot_inputs()[k];
            let (ts, tn, sign) = cnot_truth_table()[k];
            let target_label = format!("{}{}", if sign < 0.0 { "-" } else { "" }, basis_label(ts, tn));
            Ok((
                TruthTableRow {
                    input: basis_label(s, n),
                    target: target_label,
                    fidelity: fidelity(&out, &target)?,
                    output: out,
                },
                traj.hygiene,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hygiene = Hygiene::default();
    for (_, h) in &rows {
        hygiene.merge(h);
    }
    let rows: Vec<TruthTableRow> = rows.into_iter().map(|(r, _)| r).collect();
    let mean_fidelity = rows.iter().map(|r| r.fidelity).sum::<f64>() / rows.len() as f64;
    let min_fidelity = rows.iter().map(|r| r.fidelity).fold(1.0, f64::min);
    Ok(GateResult { rows, mean_fidelity, min_fidelity, gate_time: schedule.total_duration(), hygiene })
}

/// JC π/2 pulse with cantilever 1 (mode 0), lattice move, JC π pulse with
/// cantilever 2 (mode 1).
pub fn entangle_schedule(g1: f64, g2: f64) -> Result<PulseSchedule> {
    if !(g1 > 0.0 && g2 > 0.0) {
        return Err(Error::Domain("couplings must be positive".into()));
    }
    Ok(entangle_schedule_with_durations(g1, g2, PI / (4.0 * g1), PI / (2.0 * g2)))
}

pub fn entangle_schedule_with_durations(g1: f64, g2: f64, t1: f64, t2: f64) -> PulseSchedule {
    let (up, aux) = (HyperfineState::up(), HyperfineState::aux());
    PulseSchedule {
        segments: vec![
            PulseSegment {
                duration: t1,
                hamiltonian: HamiltonianSpec::Jc { lower: up, upper: aux, mode: 0, g: g1, detuning: 0.0 },
                label: "jc_pi_half_cantilever1".into(),
            },
            PulseSegment {
                duration: t2,
                hamiltonian: HamiltonianSpec::Jc { lower: up, upper: aux, mode: 1, g: g2, detuning: 0.0 },
                label: "jc_pi_cantilever2".into(),
            },
        ],
        lattice_moves: vec![LatticeMove { after_segment: 0, mode: 1 }],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangleResult {
    /// Two-mode state with the atom traced out.
    pub modes: QuantumState,
    pub bell_fidelity: f64,
    pub concurrence: f64,
    pub atom_purity: f64,
    pub atom_up_population: f64,
    pub hygiene: Hygiene,
}

/// Fidelity with `(|01⟩ + e^{iθ}|10⟩)/√2` maximised over θ; local phases on
/// each mode only change θ.
pub fn bell_fidelity(two_mode: &QuantumState, d1: usize, d2: usize) -> Result<f64> {
    if two_mode.dim() != d1 * d2 || d1 < 2 || d2 < 2 {
        return Err(Error::Dimension { expected: d1 * d2, found: two_mode.dim() });
    }
    let rho = two_mode.density();
    let (a, b) = (1, d2); // |0,1⟩ and |1,0⟩
    Ok(0.5 * (rho[(a, a)].re + rho[(b, b)].re) + rho[(a, b)].norm())
}

/// Wootters concurrence of the `{0,1}⊗{0,1}` block of a two-mode state.
/// The block is not renormalised, so population outside it counts as lost.
pub fn concurrence(two_mode: &QuantumState, d1: usize, d2: usize) -> Result<f64> {
    if two_mode.dim() != d1 * d2 || d1 < 2 || d2 < 2 {
        return Err(Error::Dimension { expected: d1 * d2, found: two_mode.dim() });
    }
    let rho = two_mode.density();
    let idx = [0, 1, d2, d2 + 1];
    let block = DMatrix::from_fn(4, 4, |i, j| rho[(idx[i], idx[j])]);
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    // σ_y ⊗ σ_y
    let yy = DMatrix::from_row_slice(4, 4, &[z, z, z, -o, z, z, o, z, z, o, z, z, -o, z, z, z]);
    let tilde = &yy * block.conjugate() * &yy;
    let s = psd_sqrt(&block);
    let m = &s * tilde * &s;
    let h = (&m + m.adjoint()) * C64::from(0.5);
    let mut lam: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

pub fn entangle_space(cutoff: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(&protocol_levels(), &[cutoff, cutoff])
}

/// Runs the entangling sequence from `|aux,0,0⟩`.
pub fn run_entangle(
    schedule: &PulseSchedule,
    cutoff: usize,
    noise: &DecoherenceConfig,
    opts: &EvolveOptions,
) -> Result<EntangleResult> {
    let space = entangle_space(cutoff)?;
    let initial = space.basis_state(HyperfineState::aux(), &[0, 0])?;
    let traj = run_schedule(&space, schedule, &initial, noise, opts)?;
    let dims = space.subsystem_dims();
    let out = traj.final_state();
    let modes = partial_trace(out, &dims, &[1, 2])?;
    let atom = partial_trace(out, &dims, &[0])?;
    let up = space.level_index(HyperfineState::up())?;
    let (d1, d2) = (dims[1], dims[2]);
    Ok(EntangleResult {
        bell_fidelity: bell_fidelity(&modes, d1, d2)?,
        concurrence: concurrence(&modes, d1, d2)?,
        atom_purity: atom.purity(),
        atom_up_population: atom.density()[(up, up)].re,
        modes,
        hygiene: traj.hygiene,
    })
}

/// `|G_m|` from a copy of the on-site tip shifted by `site_pitch` along x,
/// relative to `|G_m|` of the on-site tip. Both use the on-site field
/// direction as quantisation axis.
pub fn crosstalk_ratio(assembly: &MagnetAssembly, atom: &Vector3<f64>, site_pitch: f64) -> Result<f64> {
    if !(site_pitch > 0.0) {
        return Err(Error::Domain(format!("site pitch must be positive, got {site_pitch}")));
    }
    let tip = assembly.nearest_tip(atom).ok_or_else(|| Error::InvalidSystem("assembly has no tip magnet".into()))?;
    let q = assembly_field(assembly, atom)?
        .try_normalize(0.0)
        .ok_or_else(|| Error::Domain("field vanishes at the atom".into()))?;
    let z = Vector3::z();
    let on_site = magnet_coupling_gradient(tip, atom, &z, &q)?.transverse;
    let neighbour = tip.translated(Vector3::new(site_pitch, 0.0, 0.0));
    let off_site = magnet_coupling_gradient(&neighbour, atom, &z, &q)?.transverse;
    if on_site == 0.0 {
        return Err(Error::Domain("on-site coupling gradient vanishes".into()));
    }
    Ok(off_site / on_site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetostatics::ChipGeometry;

    const G: f64 = 2.0 * PI * 12.7;

    #[test]
    fn schedule_construction() {
        let s = cnot_schedule(G, 77.0).unwrap();
        assert!((s.total_duration() - (PI / 77.0 + PI / G)).abs() < 1e-15);
        assert!((s.segments[1].duration - 0.03937).abs() < 1e-4);
        let om = drive_for_gate_time(G, 0.08).unwrap();
        let s = cnot_schedule(G, om).unwrap();
        assert!((s.total_duration() - 0.08).abs() < 1e-15);
        assert!(drive_for_gate_time(G, 0.03).is_err());
        assert!(cnot_schedule(0.0, 1.0).is_err());
    }

    #[test]
    fn schedule_round_trip() {
        let mut s = entangle_schedule(G, 1.1 * G).unwrap();
        s.segments.push(PulseSegment {
            duration: 1e-3 / 3.0,
            hamiltonian: HamiltonianSpec::Idle,
            label: "wait".into(),
        });
        let back = PulseSchedule::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let c = cnot_schedule(G, 77.3).unwrap();
        assert_eq!(PulseSchedule::from_json(&c.to_json().unwrap()).unwrap(), c);
        let bad = PulseSchedule { lattice_moves: vec![LatticeMove { after_segment: 5, mode: 1 }], ..s };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noise_terms() {
        let space = cnot_space(3).unwrap();
        let pair = (HyperfineState::up(), HyperfineState::aux());
        assert_eq!(DecoherenceConfig::default().terms(&space, pair).unwrap().len(), 1);
        let full =
            DecoherenceConfig { thermal_occupation: 0.1, dephasing_hz: 0.7, spin_flip_hz: 0.1, ..Default::default() };
        assert_eq!(full.terms(&space, pair).unwrap().len(), 5);
        let c = DecoherenceConfig::cantilever_only(1.8);
        assert_eq!(c.terms(&space, pair).unwrap()[0].rate, 1.8);
        let c = DecoherenceConfig { convention: DampingConvention::AngularRate, ..c };
        assert!((c.terms(&space, pair).unwrap()[0].rate - 2.0 * PI * 1.8).abs() < 1e-12);
        assert!(DecoherenceConfig { dephasing_hz: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn bell_and_concurrence_of_ideal_state() {
        let d = 4;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DVector::from_element(d * d, C64::new(0.0, 0.0));
        v[1] = C64::new(0.0, -r);
        v[d] = C64::new(0.0, -r);
        let s = QuantumState::Pure(v);
        assert!((bell_fidelity(&s, d, d).unwrap() - 1.0).abs() < 1e-12);
        assert!((concurrence(&s, d, d).unwrap() - 1.0).abs() < 1e-7);
        let mut p = DVector::from_element(d * d, C64::new(0.0, 0.0));
        p[1] = C64::new(1.0, 0.0);
        let prod = QuantumState::Pure(p);
        assert!(concurrence(&prod, d, d).unwrap() < 1e-7);
        assert!((bell_fidelity(&prod, d, d).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_small_and_decreasing() {
        let g = ChipGeometry::default();
        let a = g.assembly().unwrap();
        let p = g.trap_point();
        let r = crosstalk_ratio(&a, &p, 6e-6).unwrap().abs();
        assert!(r < 0.05, "{r}");
        let far = crosstalk_ratio(&a, &p, 1e-3).unwrap().abs();
        assert!(far < 1e-9);
        assert!(crosstalk_ratio(&a, &p, 0.0).is_err());
    }
}
