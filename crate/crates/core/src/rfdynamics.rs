//! Ion response to the RF field: pseudopotential, secular modes, trap depth,
//! Mathieu q and micromotion.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{joule_to_ev, ATOMIC_MASS_UNIT, ELECTRON_MASS_U, ELEMENTARY_CHARGE, MICRON, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::fieldkernel::{FieldModel, PhasorField3, Point3};

/// Base finite-difference step for pseudopotential curvature.
pub const HESSIAN_STEP: f64 = 0.5 * MICRON;
/// Pitch of the coarse saddle scan.
pub const SADDLE_GRID_PITCH: f64 = 2.0 * MICRON;
/// Largest equivalent offset from a true stationary point (|∇Φ| / λmax)
/// accepted by [`secular_frequencies`].
pub const STATIONARY_TOL: f64 = 10e-9;

const MAX_NEWTON: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite() && charge > 0.0 && charge.is_finite()) {
            return Err(Error::InvalidArgument("ion mass and charge must be positive".into()));
        }
        Ok(Self { mass, charge })
    }

    /// Singly charged ion from an atomic mass in u.
    pub fn singly_charged(atomic_mass_u: f64) -> Result<Self> {
        Self::new((atomic_mass_u - ELECTRON_MASS_U) * ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE)
    }

    /// ¹⁷²Yb⁺ (atomic mass 171.936 381 5 u less one electron).
    pub fn ytterbium_172() -> Self {
        Self::singly_charged(171.936_381_5).expect("valid constants")
    }
}

/// `q² |E|² / (4 m Ω²)` in joules. `field_amplitude` is `sqrt(Σ|E_i|²)`.
pub fn pseudopotential(field_amplitude: f64, ion: &IonSpecies, omega: f64) -> f64 {
    let qe = ion.charge * field_amplitude;
    qe * qe / (4.0 * ion.mass * omega * omega)
}

/// Pseudopotential of a phasor field: time-averaged, so all components count
/// with their complex modulus.
pub fn pseudopotential_of(field: &PhasorField3, ion: &IonSpecies, omega: f64) -> f64 {
    ion.charge * ion.charge * field.norm_sqr() / (4.0 * ion.mass * omega * omega)
}

/// RF field model bundled with the ion and drive frequency.
#[derive(Debug, Clone)]
pub struct Pseudopotential<'a> {
    pub model: &'a FieldModel,
    pub ion: IonSpecies,
    pub omega: f64,
}

impl<'a> Pseudopotential<'a> {
    pub fn new(model: &'a FieldModel, ion: IonSpecies, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("RF angular frequency must be positive, got {omega:e}")));
        }
        Ok(Self { model, ion, omega })
    }

    pub fn value(&self, p: Point3) -> Result<f64> {
        Ok(pseudopotential_of(&self.model.field(p)?, &self.ion, self.omega))
    }

    fn raw_hessian(&self, p: Point3, h: f64) -> Result<Matrix3<f64>> {
        let step = |i: usize, s: f64| {
            let mut d = [0.0; 3];
            d[i] = s;
            d
        };
        let at = |d: [f64; 3], e: [f64; 3]| self.value(p.offset(d[0] + e[0], d[1] + e[1], d[2] + e[2]));
        let f0 = self.value(p)?;
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            let fp = at(step(i, h), [0.0; 3])?;
            let fm = at(step(i, -h), [0.0; 3])?;
            m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in (i + 1)..3 {
                let pp = at(step(i, h), step(j, h))?;
                let pm = at(step(i, h), step(j, -h))?;
                let mp = at(step(i, -h), step(j, h))?;
                let mm = at(step(i, -h), step(j, -h))?;
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Curvature matrix of Φ (J/m²), central differences at [`HESSIAN_STEP`]
    /// and half of it, combined by Richardson extrapolation.
    pub fn hessian(&self, p: Point3) -> Result<Matrix3<f64>> {
        let coarse = self.raw_hessian(p, HESSIAN_STEP)?;
        let fine = self.raw_hessian(p, 0.5 * HESSIAN_STEP)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    }

    /// Central-difference gradient of Φ, Richardson extrapolated.
    pub fn gradient(&self, p: Point3) -> Result<[f64; 3]> {
        let d = |h: f64| -> Result<[f64; 3]> {
            Ok([
                (self.value(p.offset(h, 0.0, 0.0))? - self.value(p.offset(-h, 0.0, 0.0))?) / (2.0 * h),
                (self.value(p.offset(0.0, h, 0.0))? - self.value(p.offset(0.0, -h, 0.0))?) / (2.0 * h),
                (self.value(p.offset(0.0, 0.0, h))? - self.value(p.offset(0.0, 0.0, -h))?) / (2.0 * h),
            ])
        };
        let c = d(HESSIAN_STEP)?;
        let f = d(0.5 * HESSIAN_STEP)?;
        Ok([(4.0 * f[0] - c[0]) / 3.0, (4.0 * f[1] - c[1]) / 3.0, (4.0 * f[2] - c[2]) / 3.0])
    }
}

/// Normal modes of the pseudopotential well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularModes {
    /// Hz, ordered as `[radial_low, radial_high, axial]`.
    pub frequencies: [f64; 3],
    /// Unit eigenvectors matching `frequencies`.
    pub axes: [[f64; 3]; 3],
}

impl SecularModes {
    pub fn radial(&self) -> [f64; 2] {
        [self.frequencies[0], self.frequencies[1]]
    }

    pub fn axial(&self) -> f64 {
        self.frequencies[2]
    }
}

/// Secular frequencies at a pseudopotential minimum.
///
/// The mode with the largest `z` content is reported as axial; the other two
/// must have positive curvature or the point is not a trap.
pub fn secular_frequencies(pp: &Pseudopotential<'_>, at: Point3) -> Result<SecularModes> {
    let hess = pp.hessian(at)?;
    let asym = (hess - hess.transpose()).abs().max();
    debug_assert!(asym <= 1e-6 * hess.abs().max());
    let eig = SymmetricEigen::new(hess);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::NotTrapping("pseudopotential has no positive curvature".into()));
    }
    let g = pp.gradient(at)?;
    let gnorm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if gnorm / lambda_max > STATIONARY_TOL {
        return Err(Error::NotTrapping(format!(
            "point is {:.3e} m from stationary (|∇Φ|/λ)",
            gnorm / lambda_max
        )));
    }

    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvectors[(2, a)].abs().total_cmp(&eig.eigenvectors[(2, b)].abs()));
    let axial = idx[2];
    let mut radial = [idx[0], idx[1]];
    radial.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if radial.iter().any(|&k| eig.eigenvalues[k] <= 0.0) {
        return Err(Error::NotTrapping("radial curvature is not positive definite".into()));
    }
    let freq = |lambda: f64| (lambda.max(0.0) / pp.ion.mass).sqrt() / (2.0 * PI);
    let axis = |k: usize| {
        let v = eig.eigenvectors.column(k);
        [v[0], v[1], v[2]]
    };
    let order = [radial[0], radial[1], axial];
    Ok(SecularModes {
        frequencies: order.map(|k| freq(eig.eigenvalues[k])),
        axes: order.map(axis),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapDepth {
    pub depth_ev: f64,
    pub escape: Point3,
}

fn hessian_xy(pp: &Pseudopotential<'_>, p: Point3, h: f64) -> Result<(f64, Vector2<f64>, Matrix2<f64>)> {
    let f = |dx: f64, dy: f64| pp.value(p.offset(dx, dy, 0.0));
    let f0 = f(0.0, 0.0)?;
    let (fxp, fxm, fyp, fym) = (f(h, 0.0)?, f(-h, 0.0)?, f(0.0, h)?, f(0.0, -h)?);
    let fxy = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
    let grad = Vector2::new((fxp - fxm) / (2.0 * h), (fyp - fym) / (2.0 * h));
    let hess = Matrix2::new((fxp - 2.0 * f0 + fxm) / (h * h), fxy, fxy, (fyp - 2.0 * f0 + fym) / (h * h));
    Ok((f0, grad, hess))
}

/// Newton iteration on ∇Φ = 0 in the x-y plane.
fn refine_saddle(pp: &Pseudopotential<'_>, start: Point3, x_floor: f64) -> Option<(Point3, f64)> {
    let mut p = start;
    for _ in 0..MAX_NEWTON {
        let (_, g, h) = hessian_xy(pp, p, 0.1 * MICRON).ok()?;
        let step = h.lu().solve(&(-g))?;
        let mut step = step;
        let len = step.norm();
        if len > 10.0 * MICRON {
            step *= 10.0 * MICRON / len;
        }
        p = p.offset(step[0], step[1], 0.0);
        if p.x <= x_floor {
            return None;
        }
        if step.norm() < 1e-12 {
            break;
        }
    }
    // gradient at the Newton step (small truncation bias), curvature at the coarser step
    let (f0, g, _) = hessian_xy(pp, p, 0.1 * MICRON).ok()?;
    let (_, _, h) = hessian_xy(pp, p, HESSIAN_STEP).ok()?;
    if g.norm() / h.abs().max() > STATIONARY_TOL {
        return None;
    }
    let eig = SymmetricEigen::new(h);
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    (negatives == 1).then_some((p, f0))
}

/// Depth of the pseudopotential well above the null at `null`.
///
/// A 2 µm grid over `x ∈ (x0, 4 x0]`, `|y| ≤ 2 x0` in the plane `z = null.z`
/// seeds Newton refinements at local minima of the discrete gradient norm.
/// Converged points with exactly one negative curvature are saddles; the
/// lowest one is the escape point (ties go to the lexicographically smaller
/// point).
pub fn trap_depth(pp: &Pseudopotential<'_>, null: Point3) -> Result<TrapDepth> {
    let x0 = null.x;
    let pitch = SADDLE_GRID_PITCH;
    let nx = (3.0 * x0 / pitch).floor() as usize;
    let ny = (2.0 * x0 / pitch).floor() as usize;
    let xs: Vec<f64> = (1..=nx).map(|i| x0 + i as f64 * pitch).collect();
    let ys: Vec<f64> = (-(ny as isize)..=ny as isize).map(|j| j as f64 * pitch).collect();

    let grid: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ys.iter().map(|&y| pp.value(Point3::new(x, y, null.z))).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let (nr, nc) = (xs.len(), ys.len());
    let gradsq = |i: usize, j: usize| {
        let gx = (grid[i + 1][j] - grid[i - 1][j]) / (2.0 * pitch);
        let gy = (grid[i][j + 1] - grid[i][j - 1]) / (2.0 * pitch);
        gx * gx + gy * gy
    };
    let mut seeds = Vec::new();
    for i in 2..nr.saturating_sub(2) {
        for j in 2..nc.saturating_sub(2) {
            let g = gradsq(i, j);
            let is_min = (-1i32..=1).all(|di| {
                (-1i32..=1).all(|dj| {
                    (di == 0 && dj == 0) || g <= gradsq((i as i32 + di) as usize, (j as i32 + dj) as usize)
                })
            });
            if !is_min {
                continue;
            }
            let fxx = grid[i + 1][j] - 2.0 * grid[i][j] + grid[i - 1][j];
            let fyy = grid[i][j + 1] - 2.0 * grid[i][j] + grid[i][j - 1];
            let fxy = 0.25 * (grid[i + 1][j + 1] - grid[i + 1][j - 1] - grid[i - 1][j + 1] + grid[i - 1][j - 1]);
            if fxx * fyy - fxy * fxy < 0.0 {
                seeds.push(Point3::new(xs[i], ys[j], null.z));
            }
        }
    }

    let refined: Vec<Option<(Point3, f64)>> = seeds.par_iter().map(|&s| refine_saddle(pp, s, x0)).collect();
    let best = refined.into_iter().flatten().min_by(|a, b| match a.1.total_cmp(&b.1) {
        Ordering::Equal => a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)),
        o => o,
    });
    let (escape, phi_saddle) = best.ok_or(Error::NoSaddle)?;
    let phi_null = pp.value(null)?;
    Ok(TrapDepth { depth_ev: joule_to_ev(phi_saddle - phi_null), escape })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MathieuQ {
    pub q: f64,
    pub stable: bool,
}

/// Lowest-order Mathieu relation `q = 2√2 ω_sec / Ω` with `ω_sec = 2π ν`.
pub fn mathieu_q(secular_hz: f64, omega: f64) -> MathieuQ {
    let q = 2.0 * 2f64.sqrt() * 2.0 * PI * secular_hz / omega;
    MathieuQ { q, stable: q < 0.908 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Micromotion {
    /// Driven-motion amplitude, m.
    pub amplitude: f64,
    /// Second-order Doppler (time-dilation) fractional frequency shift.
    pub time_dilation: f64,
}

/// Excess micromotion driven by a residual RF amplitude `field` (V/m).
pub fn micromotion(field: f64, ion: &IonSpecies, omega: f64) -> Micromotion {
    let amplitude = ion.charge * field / (ion.mass * omega * omega);
    let v = amplitude * omega;
    Micromotion { amplitude, time_dilation: -v * v / (4.0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT) }
}

/// Everything the runner reports about a trap site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapMetrics {
    pub modes: SecularModes,
    pub depth: TrapDepth,
    pub mathieu: MathieuQ,
}

/// Secular modes, depth and Mathieu q at the null `at`. The Mathieu q is
/// computed from the higher radial frequency.
pub fn trap_metrics(pp: &Pseudopotential<'_>, at: Point3) -> Result<TrapMetrics> {
    let modes = secular_frequencies(pp, at)?;
    let depth = trap_depth(pp, at)?;
    let mathieu = mathieu_q(modes.frequencies[1], pp.omega);
    Ok(TrapMetrics { modes, depth, mathieu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mhz_to_angular;

    // Independent constants table for the oracles below.
    const Q: f64 = 1.602176634e-19;
    const YB172_KG: f64 = 171.9358329 * 1.66053906660e-27;

    #[test]
    fn ytterbium_mass() {
        let ion = IonSpecies::ytterbium_172();
        assert!((ion.mass / YB172_KG - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pseudopotential_reference_value() {
        let ion = IonSpecies::ytterbium_172();
        let w = mhz_to_angular(16.0);
        let phi = pseudopotential(994.0, &ion, w);
        // q²E²/(4mΩ²) with the table above: 2.1974e-24 J = 1.3715e-5 eV
        let omega = 2.0 * 3.141592653589793 * 16.0e6;
        let want = (Q * 994.0).powi(2) / (4.0 * YB172_KG * omega * omega);
        assert!((phi / want - 1.0).abs() < 1e-9);
        assert!((phi - 2.1974e-24).abs() < 0.0005e-24);
        assert!((joule_to_ev(phi) - 1.3715e-5).abs() < 0.0005e-5);
        assert_eq!(pseudopotential(0.0, &ion, w), 0.0);
        assert!((pseudopotential(2.0 * 994.0, &ion, w) / phi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn micromotion_reference_values() {
        let ion = IonSpecies::ytterbium_172();
        let w = mhz_to_angular(16.0);
        let m = micromotion(994.0, &ion, w);
        // u = qE/(mΩ²) = 5.519e-8 m; shift = -(uΩ)²/(4c²) = -8.56e-17
        assert!((m.amplitude - 55.19e-9).abs() < 0.05e-9, "{}", m.amplitude);
        assert!((m.time_dilation + 8.56e-17).abs() < 0.02e-17, "{}", m.time_dilation);
        let z = micromotion(0.0, &ion, w);
        assert_eq!((z.amplitude, z.time_dilation), (0.0, 0.0));
    }

    #[test]
    fn mathieu_reference() {
        let m = mathieu_q(1.9e6, mhz_to_angular(16.0));
        assert!((m.q - 0.3359).abs() < 1e-4);
        assert!(m.stable);
        assert_eq!(mathieu_q(0.0, 1.0).q, 0.0);
        assert!(!mathieu_q(2e6, mhz_to_angular(5.0)).stable);
        let qs: Vec<f64> = (0..10).map(|k| mathieu_q(k as f64 * 0.3e6, 1e8).q).collect();
        assert!(qs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_nonpositive_ions() {
        assert!(IonSpecies::new(0.0, 1.0).is_err());
        assert!(IonSpecies::new(1.0, -1.0).is_err());
    }
}
