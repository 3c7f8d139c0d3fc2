//! Analytic magnetostatics of uniformly magnetised rectangular prisms.
//!
//! The field of a prism is the sum over its eight corners of arctan and log
//! terms (surface-charge form). The gradient tensor is the analytic
//! derivative of the same expression, so it needs no finite differencing.
//!
//! Coordinates: the membrane surface facing the atoms is the plane `z = 0`,
//! atoms sit at `z > 0` and the cantilever magnets at `z < 0`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physcore::MU_0;

/// Query points closer than this to an edge line of a prism are rejected.
pub const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetKind {
    /// Magnet carried by a cantilever; moves with the mechanical mode.
    Tip,
    /// Static gradient-compensation magnet on the chip.
    Compensation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Magnet {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    /// Magnetisation, A/m.
    pub magnetization: Vector3<f64>,
    pub kind: MagnetKind,
}

impl Magnet {
    pub fn new(
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        magnetization: Vector3<f64>,
        kind: MagnetKind,
    ) -> Result<Self> {
        if half_extents.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Domain(format!(
                "magnet half extents must be positive, got {:?}",
                half_extents.as_slice()
            )));
        }
        Ok(Self { center, half_extents, magnetization, kind })
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.product()
    }

    /// Magnetic moment `M V`, A·m².
    pub fn moment(&self) -> Vector3<f64> {
        self.magnetization * self.volume()
    }

    pub fn translated(&self, shift: Vector3<f64>) -> Self {
        Self { center: self.center + shift, ..self.clone() }
    }

    fn check_exterior(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let d = p - self.center;
        let inside = (0..3).all(|i| d[i].abs() <= self.half_extents[i] + EDGE_TOLERANCE);
        if inside {
            return Err(Error::InsideMagnet { point: [p.x, p.y, p.z] });
        }
        // an edge line extension: two of the three corner offsets vanish
        let near = |i: usize| {
            (d[i] - self.half_extents[i]).abs() < EDGE_TOLERANCE || (d[i] + self.half_extents[i]).abs() < EDGE_TOLERANCE
        };
        let hits = (0..3).filter(|&i| near(i)).count();
        if hits >= 2 {
            return Err(Error::SingularPoint { point: [p.x, p.y, p.z] });
        }
        Ok(d)
    }
}

/// Corner sums for a prism magnetised along its local third axis `s`, with
/// `(p, q, s)` a cyclic permutation of `(x, y, z)`. Returns the field and the
/// gradient tensor in units of `μ0 M / 4π`.
fn corner_sums(d: [f64; 3], h: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut b = [0.0; 3];
    let mut g = [[0.0; 3]; 3];

    // ln(u + R) with R = sqrt(u² + rest); stable for u < 0
    let ln_plus = |u: f64, r: f64, rest: f64| {
        if u >= 0.0 {
            (u + r).ln()
        } else {
            (rest / (r - u)).ln()
        }
    };
    let inv_plus = |u: f64, r: f64, rest: f64| {
        if u >= 0.0 {
            1.0 / (u + r)
        } else {
            (r - u) / rest
        }
    };

    for k in 0..2 {
        let s = d[2] - if k == 0 { -h[2] } else { h[2] };
        for n in 0..2 {
            let p = d[0] - if n == 0 { -h[0] } else { h[0] };
            for m in 0..2 {
                let q = d[1] - if m == 0 { -h[1] } else { h[1] };
                let sign = if (k + n + m) % 2 == 0 { 1.0 } else { -1.0 };

                let (p2, q2, s2) = (p * p, q * q, s * s);
                let r2 = p2 + q2 + s2;
                let r = r2.sqrt();

                b[0] += sign * ln_plus(q, r, p2 + s2);
                b[1] += sign * ln_plus(p, r, q2 + s2);
                b[2] -= sign * (p * q / (s * r)).atan();

                let iq = inv_plus(q, r, p2 + s2);
                let ip = inv_plus(p, r, q2 + s2);
                g[0][0] += sign * p * iq / r;
                g[0][1] += sign / r;
                g[0][2] += sign * s * iq / r;
                g[1][0] += sign / r;
                g[1][1] += sign * q * ip / r;
                g[1][2] += sign * s * ip / r;
                g[2][0] -= sign * q * s / (r * (p2 + s2));
                g[2][1] -= sign * p * s / (r * (q2 + s2));
                g[2][2] += sign * p * q * (r2 + s2) / (r * (p2 + s2) * (q2 + s2));
            }
        }
    }
    (b, g)
}

fn prism_field_and_gradient(m: &Magnet, p: &Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let d = m.check_exterior(p)?;
    let mut field = Vector3::zeros();
    let mut grad = Matrix3::zeros();
    for axis in 0..3 {
        let ms = m.magnetization[axis];
        if ms == 0.0 {
            continue;
        }
        let perm = [(axis + 1) % 3, (axis + 2) % 3, axis];
        let local_d = [d[perm[0]], d[perm[1]], d[perm[2]]];
        let local_h = [m.half_extents[perm[0]], m.half_extents[perm[1]], m.half_extents[perm[2]]];
        let (b, g) = corner_sums(local_d, local_h);
        let c = MU_0 * ms / (4.0 * std::f64::consts::PI);
        for i in 0..3 {
            field[perm[i]] += c * b[i];
            for j in 0..3 {
                grad[(perm[i], perm[j])] += c * g[i][j];
            }
        }
    }
    Ok((field, grad))
}

/// Exact field (T) of a uniformly magnetised prism at an exterior point.
pub fn prism_field(m: &Magnet, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    prism_field_and_gradient(m, p).map(|(b, _)| b)
}

/// `∂B_i/∂x_j` (T/m) of a single prism.
pub fn prism_gradient(m: &Magnet, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
    prism_field_and_gradient(m, p).map(|(_, g)| g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetAssembly {
    pub magnets: Vec<Magnet>,
    /// Uniform applied field, T.
    pub bias_field: Vector3<f64>,
}

/// Field, gradient tensor `∂B_i/∂x_j` and gradient of `|B|` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vector3<f64>,
    pub grad_b: Matrix3<f64>,
    pub grad_bmag: Vector3<f64>,
}

impl MagnetAssembly {
    pub fn new(magnets: Vec<Magnet>, bias_field: Vector3<f64>) -> Self {
        Self { magnets, bias_field }
    }

    pub fn bias_only(bias_field: Vector3<f64>) -> Self {
        Self { magnets: Vec::new(), bias_field }
    }

    pub fn tips(&self) -> impl Iterator<Item = &Magnet> {
        self.magnets.iter().filter(|m| m.kind == MagnetKind::Tip)
    }

    /// Tip magnet laterally closest to `p` (ties resolved by order).
    pub fn nearest_tip(&self, p: &Vector3<f64>) -> Option<&Magnet> {
        let lateral = |m: &&Magnet| (m.center.x - p.x).hypot(m.center.y - p.y);
        self.tips().min_by(|a, b| lateral(a).partial_cmp(&lateral(b)).unwrap_or(std::cmp::Ordering::Equal))
    }

    pub fn with_bias(&self, bias_field: Vector3<f64>) -> Self {
        Self { magnets: self.magnets.clone(), bias_field }
    }
}

/// Superposition of all prism fields plus the bias field.
pub fn assembly_field(a: &MagnetAssembly, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    let mut b = a.bias_field;
    for m in &a.magnets {
        b += prism_field(m, p)?;
    }
    Ok(b)
}

pub fn field_gradient(a: &MagnetAssembly, p: &Vector3<f64>) -> Result<FieldSample> {
    let mut b = a.bias_field;
    let mut g = Matrix3::zeros();
    for m in &a.magnets {
        let (bm, gm) = prism_field_and_gradient(m, p)?;
        b += bm;
        g += gm;
    }
    let mag = b.norm();
    let grad_bmag = if mag > 0.0 { g.transpose() * b / mag } else { Vector3::zeros() };
    Ok(FieldSample { b, grad_b: g, grad_bmag })
}

/// Derivative of the tip field at the atom with respect to a rigid
/// displacement of the tip along `motion_axis`, split into the parts
/// parallel and perpendicular to the local quantisation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingGradient {
    /// Signed component along the quantisation axis, T/m.
    pub longitudinal: f64,
    /// Magnitude of the component perpendicular to it, T/m.
    pub transverse: f64,
    pub quantization_axis: Vector3<f64>,
}

pub fn tip_coupling_gradient(
    a: &MagnetAssembly,
    atom_position: &Vector3<f64>,
    motion_axis: &Vector3<f64>,
) -> Result<CouplingGradient> {
    let u = motion_axis.try_normalize(0.0).ok_or_else(|| Error::Domain("motion axis has zero length".into()))?;
    let total = assembly_field(a, atom_position)?;
    let q = total
        .try_normalize(0.0)
        .ok_or_else(|| Error::Domain("field vanishes at the atom; no quantisation axis".into()))?;
    let Some(tip) = a.nearest_tip(atom_position) else {
        return Ok(CouplingGradient { longitudinal: 0.0, transverse: 0.0, quantization_axis: q });
    };
    magnet_coupling_gradient(tip, atom_position, &u, &q)
}

/// Coupling gradient of one magnet for a given quantisation axis `q`.
pub fn magnet_coupling_gradient(
    m: &Magnet,
    atom_position: &Vector3<f64>,
    motion_axis: &Vector3<f64>,
    q: &Vector3<f64>,
) -> Result<CouplingGradient> {
    // moving the magnet by +δu changes the field at the atom by −(∇B)·u δ
    let dbdu = -(prism_gradient(m, atom_position)? * motion_axis);
    let longitudinal = q.dot(&dbdu);
    let transverse = (dbdu - q * longitudinal).norm();
    Ok(CouplingGradient { longitudinal, transverse, quantization_axis: *q })
}

/// `G_m`: gradient of the field component transverse to the local
/// quantisation axis, taken along the cantilever motion. This is the part
/// of `∂B/∂z` that drives `Δm_F = ±1` exchange with the mechanical mode.
pub fn tip_gradient_gm(a: &MagnetAssembly, atom_position: &Vector3<f64>, motion_axis: &Vector3<f64>) -> Result<f64> {
    if a.tips().next().is_none() {
        return Ok(0.0);
    }
    tip_coupling_gradient(a, atom_position, motion_axis).map(|c| c.transverse)
}

/// x-component of a uniform bias that nulls the total `B_x` at `p`.
pub fn solve_bias_x(a: &MagnetAssembly, p: &Vector3<f64>) -> Result<f64> {
    let total = assembly_field(a, p)?;
    Ok(a.bias_field.x - total.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationPolarity {
    /// Try both orientations, keep the one with the smaller gradient at the trap.
    Auto,
    Parallel,
    Antiparallel,
}

/// Chip layout: a one-dimensional row of cantilever tip magnets with
/// compensation bars filling the gaps, plus the applied bias fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipGeometry {
    pub tip_size: Vector3<f64>,
    pub compensation_size: Vector3<f64>,
    /// Gap along x between a tip magnet and its neighbouring bar.
    pub compensation_gap: f64,
    pub magnetization: f64,
    pub cantilever_count: usize,
    /// Cantilever pitch `x₀ = j λ_eff / 2`.
    pub pitch: f64,
    /// Depth of the magnet centres below the surface, `r + h`.
    pub magnet_depth: f64,
    /// Atom–surface distance `d` at which the bias is nulled.
    pub trap_height: f64,
    pub bias_y: f64,
    /// Explicit x bias; `None` solves it at the trap point.
    pub bias_x: Option<f64>,
    pub polarity: CompensationPolarity,
}

impl Default for ChipGeometry {
    fn default() -> Self {
        let lambda_eff = 1500e-9;
        Self {
            tip_size: Vector3::new(700e-9, 200e-9, 150e-9),
            compensation_size: Vector3::new(5.1e-6, 200e-9, 150e-9),
            compensation_gap: 100e-9,
            magnetization: 1e6,
            cantilever_count: 3,
            pitch: 8.0 * lambda_eff / 2.0,
            magnet_depth: 250e-9 + 150e-9,
            trap_height: 375e-9,
            bias_y: 160e-6,
            bias_x: None,
            polarity: CompensationPolarity::Auto,
        }
    }
}

impl ChipGeometry {
    /// x position of cantilever `k` (the row is centred on x = 0).
    pub fn tip_x(&self, k: usize) -> f64 {
        (k as f64 - (self.cantilever_count as f64 - 1.0) / 2.0) * self.pitch
    }

    /// Atom position above the central cantilever.
    pub fn trap_point(&self) -> Vector3<f64> {
        let centre = self.cantilever_count / 2;
        Vector3::new(self.tip_x(centre), 0.0, self.trap_height)
    }

    pub fn tip_magnets(&self) -> Result<Vec<Magnet>> {
        (0..self.cantilever_count)
            .map(|k| {
                Magnet::new(
                    Vector3::new(self.tip_x(k), 0.0, -self.magnet_depth),
                    self.tip_size / 2.0,
                    Vector3::new(self.magnetization, 0.0, 0.0),
                    MagnetKind::Tip,
                )
            })
            .collect()
    }

    /// Bars on either side of every tip, shared between neighbours.
    pub fn compensation_magnets(&self, sign: f64) -> Result<Vec<Magnet>> {
        let offset = self.tip_size.x / 2.0 + self.compensation_gap + self.compensation_size.x / 2.0;
        let mut xs: Vec<f64> = Vec::new();
        for k in 0..self.cantilever_count {
            for x in [self.tip_x(k) - offset, self.tip_x(k) + offset] {
                if !xs.iter().any(|&e| (e - x).abs() < 1e-12) {
                    xs.push(x);
                }
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.into_iter()
            .map(|x| {
                Magnet::new(
                    Vector3::new(x, 0.0, -self.magnet_depth),
                    self.compensation_size / 2.0,
                    Vector3::new(sign * self.magnetization, 0.0, 0.0),
                    MagnetKind::Compensation,
                )
            })
            .collect()
    }

    fn magnets_with_polarity(&self, sign: f64) -> Result<Vec<Magnet>> {
        let mut v = self.tip_magnets()?;
        v.extend(self.compensation_magnets(sign)?);
        Ok(v)
    }

    /// Polarity sign (+1 parallel to the tips, −1 antiparallel) actually used.
    pub fn resolved_polarity(&self) -> Result<f64> {
        match self.polarity {
            CompensationPolarity::Parallel => Ok(1.0),
            CompensationPolarity::Antiparallel => Ok(-1.0),
            CompensationPolarity::Auto => {
                let p = self.trap_point();
                let norm = |sign: f64| -> Result<f64> {
                    let a = MagnetAssembly::new(self.magnets_with_polarity(sign)?, Vector3::zeros());
                    Ok(field_gradient(&a, &p)?.grad_b.norm())
                };
                Ok(if norm(1.0)? <= norm(-1.0)? { 1.0 } else { -1.0 })
            }
        }
    }

    /// Magnets only, with the y bias but no x bias.
    pub fn assembly_without_bias_x(&self) -> Result<MagnetAssembly> {
        let sign = self.resolved_polarity()?;
        Ok(MagnetAssembly::new(self.magnets_with_polarity(sign)?, Vector3::new(0.0, self.bias_y, 0.0)))
    }

    /// Full assembly including the x bias (solved at the trap point unless given).
    pub fn assembly(&self) -> Result<MagnetAssembly> {
        let mut a = self.assembly_without_bias_x()?;
        a.bias_field.x = match self.bias_x {
            Some(bx) => bx,
            None => solve_bias_x(&a, &self.trap_point())?,
        };
        Ok(a)
    }

    /// A single tip magnet with only the y bias, used for isolated-tip estimates.
    pub fn single_tip(&self) -> Result<MagnetAssembly> {
        let tip = Magnet::new(
            Vector3::new(0.0, 0.0, -self.magnet_depth),
            self.tip_size / 2.0,
            Vector3::new(self.magnetization, 0.0, 0.0),
            MagnetKind::Tip,
        )?;
        Ok(MagnetAssembly::new(vec![tip], Vector3::new(0.0, self.bias_y, 0.0)))
    }
}
