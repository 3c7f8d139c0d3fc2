//! Atom ⊗ phonon-mode Hilbert spaces, Jaynes–Cummings and drive
//! Hamiltonians, and master-equation evolution.
//!
//! Hamiltonians are stored divided by ħ, i.e. in rad/s. Basis ordering is
//! atom level slowest, then mode 0, mode 1, ... with the last mode fastest.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::zeeman::HyperfineState;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    levels: Vec<HyperfineState>,
    cutoffs: Vec<usize>,
}

/// Smallest allowed phonon truncation.
pub const MIN_CUTOFF: usize = 3;

pub fn build_space(levels: &[HyperfineState], cutoffs: &[usize]) -> Result<HilbertSpace> {
    HilbertSpace::new(levels, cutoffs)
}

impl HilbertSpace {
    pub fn new(levels: &[HyperfineState], cutoffs: &[usize]) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidSystem("need at least two atomic levels".into()));
        }
        if cutoffs.is_empty() {
            return Err(Error::InvalidSystem("need at least one phonon mode".into()));
        }
        if let Some(c) = cutoffs.iter().find(|&&c| c < MIN_CUTOFF) {
            return Err(Error::InvalidSystem(format!("Fock cutoff {c} below {MIN_CUTOFF}")));
        }
        for (k, s) in levels.iter().enumerate() {
            if levels[..k].contains(s) {
                return Err(Error::InvalidSystem(format!("level {s} listed twice")));
            }
        }
        Ok(Self { levels: levels.to_vec(), cutoffs: cutoffs.to_vec() })
    }

    pub fn levels(&self) -> &[HyperfineState] {
        &self.levels
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn atom_dim(&self) -> usize {
        self.levels.len()
    }

    pub fn mode_dim(&self, mode: usize) -> usize {
        self.cutoffs[mode] + 1
    }

    /// `[atom, mode 0, mode 1, ...]`.
    pub fn subsystem_dims(&self) -> Vec<usize> {
        std::iter::once(self.atom_dim()).chain(self.cutoffs.iter().map(|c| c + 1)).collect()
    }

    pub fn dim(&self) -> usize {
        self.subsystem_dims().iter().product()
    }

    pub fn level_index(&self, s: HyperfineState) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == s)
            .ok_or_else(|| Error::InvalidSystem(format!("level {s} not in the space")))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::InvalidSystem(format!("mode {mode} out of range ({} modes)", self.n_modes())));
        }
        Ok(())
    }

    /// Flat index of `|level⟩|n_0⟩|n_1⟩...`.
    pub fn basis_index(&self, level: HyperfineState, fock: &[usize]) -> Result<usize> {
        if fock.len() != self.n_modes() {
            return Err(Error::Dimension { expected: self.n_modes(), found: fock.len() });
        }
        let mut idx = self.level_index(level)?;
        for (k, &n) in fock.iter().enumerate() {
            if n > self.cutoffs[k] {
                return Err(Error::InvalidSystem(format!("n = {n} above cutoff of mode {k}")));
            }
            idx = idx * self.mode_dim(k) + n;
        }
        Ok(idx)
    }

    /// Inverse of [`basis_index`](Self::basis_index): (level position, Fock numbers).
    pub fn decompose(&self, mut idx: usize) -> (usize, Vec<usize>) {
        let mut fock = vec![0; self.n_modes()];
        for k in (0..self.n_modes()).rev() {
            fock[k] = idx % self.mode_dim(k);
            idx /= self.mode_dim(k);
        }
        (idx, fock)
    }

    pub fn basis_state(&self, level: HyperfineState, fock: &[usize]) -> Result<QuantumState> {
        let mut v = DVector::from_element(self.dim(), ZERO);
        v[self.basis_index(level, fock)?] = ONE;
        Ok(QuantumState::Pure(v))
    }

    /// Embeds a one-subsystem operator, identity elsewhere.
    fn embed(&self, subsystem: usize, op: &DMatrix<C64>) -> OperatorMatrix {
        let dims = self.subsystem_dims();
        let mut m = DMatrix::from_element(1, 1, ONE);
        for (k, &d) in dims.iter().enumerate() {
            let factor = if k == subsystem { op.clone() } else { DMatrix::identity(d, d) };
            m = m.kronecker(&factor);
        }
        OperatorMatrix(m)
    }

    pub fn identity(&self) -> OperatorMatrix {
        OperatorMatrix::identity(self.dim())
    }

    /// `|to⟩⟨from|` on the atom, identity on the modes.
    pub fn transition(&self, to: HyperfineState, from: HyperfineState) -> Result<OperatorMatrix> {
        let d = self.atom_dim();
        let mut m = DMatrix::from_element(d, d, ZERO);
        m[(self.level_index(to)?, self.level_index(from)?)] = ONE;
        Ok(self.embed(0, &m))
    }

    pub fn projector(&self, s: HyperfineState) -> Result<OperatorMatrix> {
        self.transition(s, s)
    }

    pub fn annihilation(&self, mode: usize) -> Result<OperatorMatrix> {
        self.check_mode(mode)?;
        let d = self.mode_dim(mode);
        let mut a = DMatrix::from_element(d, d, ZERO);
        for n in 1..d {
            a[(n - 1, n)] = C64::from((n as f64).sqrt());
        }
        Ok(self.embed(1 + mode, &a))
    }

    pub fn number(&self, mode: usize) -> Result<OperatorMatrix> {
        let a = self.annihilation(mode)?;
        Ok(&a.adjoint() * &a)
    }

    /// `a†a + |upper⟩⟨upper|`, conserved by the resonant JC coupling.
    pub fn excitation_number(&self, upper: HyperfineState, mode: usize) -> Result<OperatorMatrix> {
        Ok(self.number(mode)? + self.projector(upper)?)
    }
}

/// Dense complex operator on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(pub DMatrix<C64>);

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::from_element(dim, dim, ZERO))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    /// Largest element of `|H − H†|`.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn to_sparse(&self) -> SparseOperator {
        SparseOperator::from_dense(&self.0)
    }

    /// `exp(−i H t)` for Hermitian `H`, by eigendecomposition.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let eig = SymmetricEigen::new(self.0.clone());
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-I * e * t).exp()));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }
}

impl Add for OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

impl Mul<OperatorMatrix> for f64 {
    type Output = OperatorMatrix;
    fn mul(self, rhs: OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(rhs.0 * C64::from(self))
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Coordinate-list operator used in the integrator's inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `A · M`.
    pub fn mul_left(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(self.dim, m.ncols(), ZERO);
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for &(i, j, v) in &self.entries {
                dst[i] += v * src[j];
            }
        }
        out
    }

    /// `M · A†`.
    pub fn mul_right_adjoint(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(m.nrows(), self.dim, ZERO);
        for &(k, j, v) in &self.entries {
            let cv = v.conj();
            let (src, mut dst) = (m.column(j), out.column_mut(k));
            for r in 0..src.len() {
                dst[r] += cv * src[r];
            }
        }
        out
    }
}

/// A collapse operator `L` with rate `γ` (s⁻¹), entering as `γ D[L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTerm {
    pub operator: OperatorMatrix,
    pub rate: f64,
    pub label: String,
}

impl LindbladTerm {
    pub fn new(operator: OperatorMatrix, rate: f64, label: impl Into<String>) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::Domain(format!("Lindblad rate must be non-negative, got {rate}")));
        }
        Ok(Self { operator, rate, label: label.into() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(DVector<C64>),
    Density(DMatrix<C64>),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Density(m) => m.nrows(),
        }
    }

    pub fn is_pure_vector(&self) -> bool {
        matches!(self, Self::Pure(_))
    }

    pub fn density(&self) -> DMatrix<C64> {
        match self {
            Self::Pure(v) => v * v.adjoint(),
            Self::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self::Density(self.density())
    }

    /// State from a normalised or unnormalised vector, normalised here.
    pub fn from_amplitudes(v: DVector<C64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::Domain("zero state vector".into()));
        }
        Ok(Self::Pure(v / C64::from(n)))
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Pure(v) => v.norm_squared(),
            Self::Density(m) => m.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Pure(v) => v.norm_squared().powi(2),
            Self::Density(m) => (m * m).trace().re,
        }
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        check_dim(op.dim(), self.dim())?;
        Ok(match self {
            Self::Pure(v) => v.dotc(&(&op.0 * v)),
            Self::Density(m) => (&op.0 * m).trace(),
        })
    }

    /// Diagonal of the density matrix.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Self::Density(m) => m.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Self::Pure(_) => 0.0,
            Self::Density(m) => {
                let h = (m + m.adjoint()) * C64::from(0.5);
                SymmetricEigen::new(h).eigenvalues.min()
            }
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        match self {
            Self::Pure(_) => 0.0,
            Self::Density(m) => max_abs(&(m - m.adjoint())),
        }
    }

    /// Kronecker product `self ⊗ other`, kept pure when both are.
    pub fn tensor(&self, other: &Self) -> Self {
        match (self, other) {
            (Self::Pure(a), Self::Pure(b)) => Self::Pure(a.kronecker(b)),
            _ => Self::Density(self.density().kronecker(&other.density())),
        }
    }

    /// Checks the invariants of a physical state.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Pure(v) => {
                if (v.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSystem(format!("state norm {}", v.norm())));
                }
            }
            Self::Density(_) => {
                let h = Hygiene::of(self);
                if !h.ok() {
                    return Err(Error::InvalidSystem(format!("density matrix fails checks: {h:?}")));
                }
            }
        }
        Ok(())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

/// Resonant or detuned JC coupling on `pair = (lower, upper)` to `mode`, in
/// the frame rotating at the mode frequency:
/// `Δ |upper⟩⟨upper| + g (S⁺ a + S⁻ a†)` with `S⁺ = |upper⟩⟨lower|`.
pub fn build_jc_hamiltonian(
    space: &HilbertSpace,
    pair: (HyperfineState, HyperfineState),
    mode: usize,
    g: f64,
    detuning: f64,
) -> Result<OperatorMatrix> {
    let (lower, upper) = pair;
    let a = space.annihilation(mode)?;
    let s_plus = space.transition(upper, lower)?;
    let coupling = &s_plus * &a;
    let h = g * (coupling.clone() + coupling.adjoint()) + detuning * space.projector(upper)?;
    Ok(h)
}

/// Laboratory-frame version of the JC model, including the counter-rotating
/// terms: `ω_c (a†a + ½) + Σ E_l |l⟩⟨l| + g (S⁺ + S⁻)(a + a†)`.
/// `level_energies` are angular frequencies in the order of `space.levels()`.
pub fn build_lab_jc_hamiltonian(
    space: &HilbertSpace,
    pair: (HyperfineState, HyperfineState),
    mode: usize,
    g: f64,
    omega_c: f64,
    level_energies: &[f64],
) -> Result<OperatorMatrix> {
    check_dim(space.atom_dim(), level_energies.len())?;
    let (lower, upper) = pair;
    let a = space.annihilation(mode)?;
    let x = a.clone() + a.adjoint();
    let s_plus = space.transition(upper, lower)?;
    let sx = s_plus.clone() + s_plus.adjoint();
    let mut h = omega_c * (space.number(mode)? + 0.5 * space.identity()) + g * (&sx * &x);
    for (l, &e) in space.levels().iter().zip(level_energies) {
        h = h + e * space.projector(*l)?;
    }
    Ok(h)
}

/// `Ω/2 (|down⟩⟨up| e^{−iφ} + |up⟩⟨down| e^{iφ})`, identity on the modes.
pub fn build_drive_hamiltonian(
    space: &HilbertSpace,
    pair: (HyperfineState, HyperfineState),
    omega: f64,
    phi: f64,
) -> Result<OperatorMatrix> {
    let (down, up) = pair;
    let lowering = space.transition(down, up)?;
    let e = C64::from_polar(1.0, -phi);
    let term = lowering.scale(e * 0.5 * omega);
    Ok(term.clone() + term.adjoint())
}

/// Precomputed master equation `dρ/dt = −i[H, ρ] + Σ γ D[L]ρ`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    /// `H − (i/2) Σ γ L†L`
    h_eff: SparseOperator,
    /// `√γ L`
    jumps: Vec<SparseOperator>,
}

impl MasterEquation {
    pub fn new(h: &OperatorMatrix, terms: &[LindbladTerm]) -> Result<Self> {
        let dim = h.dim();
        let mut h_eff = h.0.clone();
        let mut jumps = Vec::new();
        for t in terms {
            check_dim(dim, t.operator.dim())?;
            if t.rate == 0.0 {
                continue;
            }
            let l = &t.operator.0;
            h_eff -= (l.adjoint() * l) * (I * 0.5 * t.rate);
            jumps.push(SparseOperator::from_dense(&(l * C64::from(t.rate.sqrt()))));
        }
        Ok(Self { h_eff: SparseOperator::from_dense(&h_eff), jumps })
    }

    pub fn is_unitary(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Right-hand side for a Hermitian density matrix.
    pub fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let a = self.h_eff.mul_left(rho) * (-I);
        let mut out = &a + a.adjoint();
        for l in &self.jumps {
            let lr = l.mul_left(rho);
            out += l.mul_right_adjoint(&lr);
        }
        out
    }

    /// Schrödinger right-hand side `−i H ψ` (valid only without jumps).
    pub fn rhs_pure(&self, psi: &DMatrix<C64>) -> DMatrix<C64> {
        self.h_eff.mul_left(psi) * (-I)
    }
}

pub fn lindblad_rhs(rho: &QuantumState, h: &OperatorMatrix, terms: &[LindbladTerm]) -> Result<DMatrix<C64>> {
    let QuantumState::Density(m) = rho else {
        return Err(Error::InvalidSystem("lindblad_rhs needs a density matrix".into()));
    };
    check_dim(h.dim(), m.nrows())?;
    let eq = MasterEquation::new(h, terms)?;
    // general (not necessarily Hermitian) input: evaluate both products
    let mut out = eq.h_eff.mul_left(m) * (-I) + eq.h_eff.mul_right_adjoint(m) * I;
    for l in &eq.jumps {
        out += l.mul_right_adjoint(&l.mul_left(m));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 10_000_000 }
    }
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes c_i are not needed
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates the autonomous system `y' = f(y)` over `duration` with an
/// adaptive Dormand–Prince 5(4) pair. Returns the final state and the
/// number of accepted steps.
pub fn integrate<F>(f: F, y0: &DMatrix<C64>, duration: f64, opts: &IntegratorOptions) -> Result<(DMatrix<C64>, usize)>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    if !(duration >= 0.0) {
        return Err(Error::Domain(format!("negative segment duration {duration}")));
    }
    let mut y = y0.clone();
    if duration == 0.0 {
        return Ok((y, 0));
    }
    let mut t = 0.0;
    let mut k1 = f(&y);
    let scale0 = max_abs(&y).max(opts.atol);
    let rate = max_abs(&k1) / scale0;
    let mut h = if rate > 0.0 { (0.01 / rate).min(duration) } else { duration };
    let mut steps = 0usize;
    let mut attempts = 0usize;
    while t < duration {
        if attempts >= opts.max_steps {
            return Err(Error::Integrator { t, step: h, steps, reason: "step budget exhausted".into() });
        }
        attempts += 1;
        let last = t + h >= duration;
        if last {
            h = duration - t;
        }
        let k2 = f(&(&y + &k1 * C64::from(h * A21)));
        let k3 = f(&(&y + (&k1 * C64::from(A31) + &k2 * C64::from(A32)) * C64::from(h)));
        let k4 = f(&(&y + (&k1 * C64::from(A41) + &k2 * C64::from(A42) + &k3 * C64::from(A43)) * C64::from(h)));
        let k5 = f(&(&y
            + (&k1 * C64::from(A51) + &k2 * C64::from(A52) + &k3 * C64::from(A53) + &k4 * C64::from(A54))
                * C64::from(h)));
        let k6 = f(&(&y
            + (&k1 * C64::from(A61)
                + &k2 * C64::from(A62)
                + &k3 * C64::from(A63)
                + &k4 * C64::from(A64)
                + &k5 * C64::from(A65))
                * C64::from(h)));
        let y_new = &y
            + (&k1 * C64::from(B1)
                + &k3 * C64::from(B3)
                + &k4 * C64::from(B4)
                + &k5 * C64::from(B5)
                + &k6 * C64::from(B6))
                * C64::from(h);
        let k7 = f(&y_new);
        let err_vec = (&k1 * C64::from(E1)
            + &k3 * C64::from(E3)
            + &k4 * C64::from(E4)
            + &k5 * C64::from(E5)
            + &k6 * C64::from(E6)
            + &k7 * C64::from(E7))
            * C64::from(h);
        let mut err: f64 = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integrator { t, step: h, steps, reason: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            t = if last { duration } else { t + h };
            y = y_new;
            k1 = k7;
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-15 * duration.max(1e-300) {
            return Err(Error::Integrator { t, step: h, steps, reason: "step size underflow".into() });
        }
    }
    Ok((y, steps))
}

/// One piecewise-constant stretch of evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub hamiltonian: OperatorMatrix,
    pub duration: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub segment: usize,
    pub label: String,
    pub state: QuantumState,
}

/// Worst values of the state-validity checks seen along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hygiene {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Default for Hygiene {
    fn default() -> Self {
        Self { max_trace_error: 0.0, max_hermiticity_error: 0.0, min_eigenvalue: 0.0 }
    }
}

impl Hygiene {
    pub fn of(s: &QuantumState) -> Self {
        Self {
            max_trace_error: (s.trace() - 1.0).abs(),
            max_hermiticity_error: s.hermiticity_error(),
            min_eigenvalue: s.min_eigenvalue(),
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub fn ok(&self) -> bool {
        self.max_trace_error <= 1e-8 && self.max_hermiticity_error <= 1e-10 && self.min_eigenvalue > -1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub hygiene: Hygiene,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &QuantumState {
        &self.samples.last().expect("trajectory always holds the initial sample").state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    pub integrator: IntegratorOptions,
    /// Extra evenly spaced samples inside each segment.
    pub samples_per_segment: usize,
}

/// Runs `segments` in order from `state`. Pure states stay pure when no
/// collapse term has a positive rate; otherwise evolution is on ρ.
pub fn evolve(
    state: &QuantumState,
    segments: &[Segment],
    terms: &[LindbladTerm],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let dim = state.dim();
    for s in segments {
        check_dim(dim, s.hamiltonian.dim())?;
        if !(s.duration >= 0.0) {
            return Err(Error::Domain(format!("segment '{}' has negative duration", s.label)));
        }
    }
    let lossless = terms.iter().all(|t| t.rate == 0.0);
    let pure = lossless && state.is_pure_vector();
    let mut y = match state {
        QuantumState::Pure(v) if pure => DMatrix::from_column_slice(dim, 1, v.as_slice()),
        _ => state.density(),
    };
    let wrap = |y: &DMatrix<C64>| {
        if pure {
            QuantumState::Pure(DVector::from_column_slice(y.as_slice()))
        } else {
            QuantumState::Density(y.clone())
        }
    };
    let mut t = 0.0;
    let mut steps = 0;
    let mut hygiene = Hygiene::default();
    let mut samples = vec![TrajectorySample { time: 0.0, segment: 0, label: "start".into(), state: wrap(&y) }];
    for (k, seg) in segments.iter().enumerate() {
        let eq = MasterEquation::new(&seg.hamiltonian, terms)?;
        let pieces = opts.samples_per_segment + 1;
        let dt = seg.duration / pieces as f64;
        for _ in 0..pieces {
            let (y_new, n) = if pure {
                integrate(|v| eq.rhs_pure(v), &y, dt, &opts.integrator)?
            } else {
                integrate(|r| eq.rhs(r), &y, dt, &opts.integrator)?
            };
            y = y_new;
            steps += n;
            t += dt;
            let s = wrap(&y);
            if pure {
                hygiene.max_trace_error = hygiene.max_trace_error.max((s.trace() - 1.0).abs());
            } else {
                hygiene.merge(&Hygiene::of(&s));
            }
            samples.push(TrajectorySample { time: t, segment: k, label: seg.label.clone(), state: s });
        }
    }
    Ok(Trajectory { samples, hygiene, steps })
}

/// Hermitian square root of a positive semidefinite matrix; negative
/// round-off eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from(e.max(0.0).sqrt())));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// `⟨ψ|ρ|ψ⟩` for a pure target, Uhlmann `(tr √(√ρ σ √ρ))²` otherwise.
pub fn fidelity(rho: &QuantumState, target: &QuantumState) -> Result<f64> {
    check_dim(rho.dim(), target.dim())?;
    let f = match (rho, target) {
        (QuantumState::Pure(a), QuantumState::Pure(b)) => b.dotc(a).norm_sqr(),
        (_, QuantumState::Pure(b)) => b.dotc(&(rho.density() * b)).re,
        (QuantumState::Pure(a), QuantumState::Density(s)) => a.dotc(&(s * a)).re,
        (QuantumState::Density(r), QuantumState::Density(s)) => {
            let sr = psd_sqrt(r);
            let inner = &sr * s * &sr;
            let h = (&inner + inner.adjoint()) * C64::from(0.5);
            let tr: f64 = SymmetricEigen::new(h).eigenvalues.iter().map(|e| e.max(0.0).sqrt()).sum();
            tr * tr
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Reduced state on the subsystems listed in `keep` (ascending order
/// preserved in the result), given subsystem dimensions `dims`.
pub fn partial_trace(state: &QuantumState, dims: &[usize], keep: &[usize]) -> Result<QuantumState> {
    let total: usize = dims.iter().product();
    check_dim(total, state.dim())?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidSystem(format!("bad subsystem list {keep:?} for {} subsystems", dims.len())));
    }
    let rho = state.density();
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            d[k] = idx % dims[k];
            idx /= dims[k];
        }
        d
    };
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let red_dim: usize = kept_dims.iter().product();
    let compose = |d: &[usize]| keep_sorted.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
    let all_digits: Vec<Vec<usize>> = (0..total).map(digits).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let mut out = DMatrix::from_element(red_dim, red_dim, ZERO);
    for i in 0..total {
        let di = &all_digits[i];
        for j in 0..total {
            let dj = &all_digits[j];
            if traced.iter().all(|&k| di[k] == dj[k]) {
                out[(compose(di), compose(dj))] += rho[(i, j)];
            }
        }
    }
    Ok(QuantumState::Density(out))
}

/// Mean occupation of a Boltzmann distribution truncated to `0..=n_max`
/// with ratio `q = e^{−ħω/k_BT}`.
pub fn truncated_mean(q: f64, n_max: usize) -> f64 {
    let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
    for n in 0..=n_max {
        num += n as f64 * w;
        den += w;
        w *= q;
    }
    num / den
}

/// Thermal state of one mode (dimension `cutoff + 1`). The Boltzmann ratio
/// is chosen so that the truncated distribution has mean exactly `n_bar`.
pub fn thermal_state(space: &HilbertSpace, mode: usize, n_bar: f64) -> Result<QuantumState> {
    space.check_mode(mode)?;
    let n_max = space.cutoffs()[mode];
    if !(n_bar >= 0.0) || n_bar >= n_max as f64 / 2.0 {
        return Err(Error::Domain(format!("mean occupation {n_bar} not representable with cutoff {n_max}")));
    }
    let q = if n_bar == 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if truncated_mean(mid, n_max) < n_bar {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let weights: Vec<f64> = (0..=n_max).map(|n| q.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let diag = DVector::from_iterator(n_max + 1, weights.iter().map(|w| C64::from(w / z)));
    Ok(QuantumState::Density(DMatrix::from_diagonal(&diag)))
}

/// Column data for a trajectory export: time, level populations, ⟨n⟩ per
/// mode, purity and (optionally) fidelity to `target`.
pub fn trajectory_table(
    space: &HilbertSpace,
    traj: &Trajectory,
    target: Option<&QuantumState>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header = vec!["time_s".to_string()];
    header.extend(space.levels().iter().map(|l| format!("pop_{}", l.tag())));
    header.extend((0..space.n_modes()).map(|k| format!("n_mode{k}")));
    header.push("purity".into());
    if target.is_some() {
        header.push("fidelity".into());
    }
    let projectors = space.levels().iter().map(|&l| space.projector(l)).collect::<Result<Vec<_>>>()?;
    let numbers = (0..space.n_modes()).map(|k| space.number(k)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let mut row = vec![s.time];
        for p in projectors.iter().chain(&numbers) {
            row.push(s.state.expectation(p)?.re);
        }
        row.push(s.state.purity());
        if let Some(t) = target {
            row.push(fidelity(&s.state, t)?);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn qubit_space(cutoff: usize) -> HilbertSpace {
        HilbertSpace::new(&[HyperfineState::up(), HyperfineState::aux()], &[cutoff]).unwrap()
    }

    #[test]
    fn space_layout() {
        let s = qubit_space(3);
        assert_eq!(s.dim(), 8);
        assert!(HilbertSpace::new(&[HyperfineState::up()], &[3]).is_err());
        assert!(HilbertSpace::new(&[HyperfineState::up(), HyperfineState::aux()], &[2]).is_err());
        assert!(HilbertSpace::new(&[HyperfineState::up(), HyperfineState::aux()], &[]).is_err());
        for i in 0..s.dim() {
            let (l, f) = s.decompose(i);
            assert_eq!(s.basis_index(s.levels()[l], &f).unwrap(), i);
        }
    }

    #[test]
    fn ladder_algebra() {
        let s = qubit_space(4);
        let n = s.number(0).unwrap();
        for i in 0..s.dim() {
            let (_, f) = s.decompose(i);
            assert!((n.0[(i, i)].re - f[0] as f64).abs() < 1e-15);
        }
        let a = s.annihilation(0).unwrap();
        let comm = a.commutator(&a.adjoint());
        for i in 0..s.dim() {
            let (_, f) = s.decompose(i);
            if f[0] < 4 {
                assert!((comm.0[(i, i)] - ONE).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn jc_matrix_elements_and_conservation() {
        let s = qubit_space(5);
        let (lo, up) = (HyperfineState::up(), HyperfineState::aux());
        let g = 3.0;
        let h = build_jc_hamiltonian(&s, (lo, up), 0, g, 0.7).unwrap();
        assert!(h.hermiticity_error() < 1e-15);
        for n in 1..=5 {
            let i = s.basis_index(up, &[n - 1]).unwrap();
            let j = s.basis_index(lo, &[n]).unwrap();
            assert!((h.0[(i, j)].re - g * (n as f64).sqrt()).abs() < 1e-14);
        }
        let ne = s.excitation_number(up, 0).unwrap();
        assert!(h.commutator(&ne).max_abs() < 1e-12 * h.max_abs());
        let zero = build_jc_hamiltonian(&s, (lo, up), 0, 0.0, 0.0).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert!(build_jc_hamiltonian(&s, (lo, HyperfineState::down()), 0, g, 0.0).is_err());
        assert!(build_jc_hamiltonian(&s, (lo, up), 1, g, 0.0).is_err());
    }

    #[test]
    fn drive_pi_over_two() {
        let (d, u) = (HyperfineState::down(), HyperfineState::up());
        let s = HilbertSpace::new(&[d, u], &[3]).unwrap();
        let om = 2.0;
        let h = build_drive_hamiltonian(&s, (d, u), om, PI / 2.0).unwrap();
        let p = h.propagator(PI / (2.0 * om));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let iu = s.basis_index(u, &[0]).unwrap();
        let id = s.basis_index(d, &[0]).unwrap();
        // |↑⟩ → (|↑⟩ − |↓⟩)/√2, |↓⟩ → (|↑⟩ + |↓⟩)/√2
        assert!((p[(iu, iu)] - C64::from(r)).norm() < 1e-12);
        assert!((p[(id, iu)] - C64::from(-r)).norm() < 1e-12);
        assert!((p[(iu, id)] - C64::from(r)).norm() < 1e-12);
        assert!((p[(id, id)] - C64::from(r)).norm() < 1e-12);
        let back = build_drive_hamiltonian(&s, (d, u), om, 1.5 * PI).unwrap().propagator(PI / (2.0 * om));
        let id_err = max_abs(&(back * p - DMatrix::identity(s.dim(), s.dim())));
        assert!(id_err < 1e-10);
        assert_eq!(build_drive_hamiltonian(&s, (d, u), 0.0, 0.3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rhs_trivial_and_traceless() {
        let s = qubit_space(3);
        let rho = s.basis_state(HyperfineState::aux(), &[1]).unwrap().to_density();
        let z = lindblad_rhs(&rho, &OperatorMatrix::zeros(s.dim()), &[]).unwrap();
        assert_eq!(max_abs(&z), 0.0);
        let h = build_jc_hamiltonian(&s, (HyperfineState::up(), HyperfineState::aux()), 0, 1.3, 0.2).unwrap();
        let terms = vec![LindbladTerm::new(s.annihilation(0).unwrap(), 0.7, "a").unwrap()];
        let d = lindblad_rhs(&rho, &h, &terms).unwrap();
        assert!(d.trace().norm() < 1e-12);
        assert!(lindblad_rhs(&rho, &OperatorMatrix::zeros(3), &[]).is_err());
        assert!(LindbladTerm::new(s.identity(), -1.0, "bad").is_err());
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = qubit_space(3);
        let psi = s.basis_state(HyperfineState::aux(), &[0]).unwrap();
        let seg = Segment { hamiltonian: s.identity(), duration: 0.0, label: "idle".into() };
        let tr = evolve(&psi, &[seg], &[], &EvolveOptions::default()).unwrap();
        assert_eq!(tr.final_state(), &psi);
    }

    #[test]
    fn fidelity_basics() {
        let s = qubit_space(3);
        let a = s.basis_state(HyperfineState::aux(), &[0]).unwrap();
        let b = s.basis_state(HyperfineState::up(), &[1]).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let mixed = QuantumState::Density(DMatrix::identity(2, 2) * C64::from(0.5));
        let plus = QuantumState::from_amplitudes(DVector::from_vec(vec![ONE, I])).unwrap();
        assert!((fidelity(&mixed, &plus).unwrap() - 0.5).abs() < 1e-15);
        assert!((fidelity(&plus.to_density(), &plus.to_density()).unwrap() - 1.0).abs() < 1e-7);
        assert!(fidelity(&a, &plus).is_err());
    }

    #[test]
    fn partial_traces() {
        let up = QuantumState::Pure(DVector::from_vec(vec![ONE, ZERO]));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = QuantumState::Pure(DVector::from_vec(vec![C64::from(r), C64::from(r)]));
        let prod = up.tensor(&plus);
        let red = partial_trace(&prod, &[2, 2], &[1]).unwrap();
        assert!(max_abs(&(red.density() - plus.density())) < 1e-15);
        let bell = QuantumState::Pure(DVector::from_vec(vec![C64::from(r), ZERO, ZERO, C64::from(r)]));
        let red = partial_trace(&bell, &[2, 2], &[0]).unwrap();
        assert!(max_abs(&(red.density() - DMatrix::identity(2, 2) * C64::from(0.5))) < 1e-15);
        assert!((red.trace() - 1.0).abs() < 1e-12);
        assert!(partial_trace(&bell, &[2, 2], &[2]).is_err());
        assert!(partial_trace(&bell, &[2, 3], &[0]).is_err());
    }

    #[test]
    fn thermal_states() {
        let s = HilbertSpace::new(&[HyperfineState::up(), HyperfineState::aux()], &[12]).unwrap();
        let t0 = thermal_state(&s, 0, 0.0).unwrap().density();
        assert_eq!(t0[(0, 0)], ONE);
        assert!(max_abs(&t0) == 1.0);
        let t = thermal_state(&s, 0, 0.5).unwrap().density();
        let mean: f64 = (0..13).map(|n| n as f64 * t[(n, n)].re).sum();
        assert!((mean - 0.5).abs() < 1e-6);
        for i in 0..13 {
            for j in 0..13 {
                if i != j {
                    assert_eq!(t[(i, j)], ZERO);
                }
            }
        }
        assert!(thermal_state(&s, 0, 7.0).is_err());
    }
}
