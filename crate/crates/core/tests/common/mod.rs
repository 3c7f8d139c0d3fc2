//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use hybridsim::magnetostatics::Magnet;
use hybridsim::physcore::{AtomSpecies, H_PLANCK, MU_0};
use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Ground-state energies (Hz, ascending) from the full hyperfine plus
/// Zeeman Hamiltonian in the uncoupled `|m_J, m_I⟩` basis.
pub fn hyperfine_zeeman_eigenvalues(species: &AtomSpecies, b: f64) -> Vec<f64> {
    let i = species.nuclear_spin;
    let n_i = (2.0 * i + 1.0).round() as usize;
    let a = species.hyperfine_splitting / (i + 0.5);
    let mu_b_hz = hybridsim::physcore::MU_B / H_PLANCK;
    let m_i = |k: usize| i - k as f64;
    let m_j = |k: usize| 0.5 - k as f64;
    let idx = |kj: usize, ki: usize| kj * n_i + ki;
    let dim = 2 * n_i;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let ladder = |j: f64, m: f64| (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
    for kj in 0..2 {
        for ki in 0..n_i {
            let (mj, mi) = (m_j(kj), m_i(ki));
            let r = idx(kj, ki);
            h[(r, r)] += a * mi * mj + mu_b_hz * b * (species.g_j * mj + species.g_i * mi);
            // ½ A (I⁺J⁻ + I⁻J⁺)
            if kj == 0 && ki > 0 {
                let c = 0.5 * a * ladder(i, mi) * ladder(0.5, -0.5);
                let col = idx(1, ki - 1);
                h[(r, col)] += c;
                h[(col, r)] += c;
            }
        }
    }
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn dipole_field(moment: &Vector3<f64>, r: &Vector3<f64>) -> Vector3<f64> {
    let d = r.norm();
    let u = r / d;
    MU_0 / (4.0 * PI * d.powi(3)) * (3.0 * moment.dot(&u) * u - moment)
}

/// Field of a prism approximated by `n³` point dipoles on a midpoint grid.
pub fn dipole_sum_field(m: &Magnet, p: &Vector3<f64>, n: usize) -> Vector3<f64> {
    let cell = m.half_extents * 2.0 / n as f64;
    let moment = m.magnetization * cell.product();
    let corner = m.center - m.half_extents;
    let mut b = Vector3::zeros();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = corner
                    + Vector3::new((i as f64 + 0.5) * cell.x, (j as f64 + 0.5) * cell.y, (k as f64 + 0.5) * cell.z);
                b += dipole_field(&moment, &(p - c));
            }
        }
    }
    b
}

/// Five-point central differences: `out[(i, j)] = ∂f_i/∂x_j`.
pub fn fd_jacobian<F: Fn(&Vector3<f64>) -> Vector3<f64>>(f: F, p: &Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for j in 0..3 {
        let e = Vector3::ith(j, h);
        let d = (-f(&(p + 2.0 * e)) + 8.0 * f(&(p + e)) - 8.0 * f(&(p - e)) + f(&(p - 2.0 * e))) / (12.0 * h);
        g.set_column(j, &d);
    }
    g
}

/// Resonant JC transfer `|↑,1⟩ → |aux,0⟩`.
pub fn jc_transfer(g: f64, t: f64) -> f64 {
    (g * t).sin().powi(2)
}

/// `exp(−i H t)` for `H = Ω/2 (|d⟩⟨u| e^{−iφ} + h.c.)` on `(d, u)`.
pub fn drive_unitary(omega: f64, phi: f64, t: f64) -> Matrix2<C64> {
    let th = omega * t / 2.0;
    let (c, s) = (C64::new(th.cos(), 0.0), C64::new(0.0, -th.sin()));
    Matrix2::new(c, s * C64::from_polar(1.0, -phi), s * C64::from_polar(1.0, phi), c)
}

/// CNOT on `(↓0, ↓1, ↑0, ↑1)` composed from 2×2 blocks: in each phonon
/// sector `n` the spin sees `R(−π/2) · diag(1, s_n) · R(π/2)`, with
/// `s_0 = 1` and `s_1 = −1` from the closed 2π cycle through `|aux,0⟩`.
pub fn cnot_oracle() -> Matrix4<C64> {
    let omega = 1.0;
    let t = PI / 2.0;
    let open = drive_unitary(omega, PI / 2.0, t);
    let close = drive_unitary(omega, -PI / 2.0, t);
    let mut u = Matrix4::zeros();
    for (n, s) in [(0usize, 1.0), (1, -1.0)] {
        let phase = Matrix2::new(C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from(s));
        let block = close * phase * open;
        // basis order (↓0, ↓1, ↑0, ↑1): spin index * 2 + n
        for a in 0..2 {
            for b in 0..2 {
                u[(a * 2 + n, b * 2 + n)] = block[(a, b)];
            }
        }
    }
    u
}

/// Elapsed seconds of `f` together with its result.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}
