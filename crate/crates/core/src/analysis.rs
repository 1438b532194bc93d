//! Measurement procedures on RF field maps: radial null, displacement from
//! the reference trap, axial scans and peak metrics.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::MICRON;
use crate::error::{Error, Result};
use crate::fieldkernel::{FieldModel, PhasorField3, Point3};
use crate::geometry::{build_reference_layout, Drive, DriveKind, TrapLayout};

/// Finite-difference step of the null search.
pub const NULL_FD_STEP: f64 = 0.1 * MICRON;
pub const NULL_MAX_ITER: usize = 200;
pub const NULL_STEP_TOL: f64 = 1e-12;
pub const NULL_GRAD_RTOL: f64 = 1e-14;

/// Default starting point for the reference trap null.
pub const REFERENCE_GUESS: (f64, f64) = (100.0 * MICRON, 0.0);

/// Default axial scan: ±1 mm, 2001 samples.
pub const DEFAULT_SCAN_HALF_RANGE: f64 = 1000.0 * MICRON;
pub const DEFAULT_SCAN_SAMPLES: usize = 2001;

/// Minimum samples between the half-maximum points for a resolved peak.
pub const MIN_SAMPLES_IN_FWHM: usize = 8;

/// A component smaller than this fraction of the largest |E| in the scan is
/// cancellation residue, not a peak.
pub const PEAK_NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullResult {
    /// (x0, y0, z) of the radial minimum.
    pub position: Point3,
    /// Minimum of `sqrt(|Ex|² + |Ey|²)`, V/m.
    pub residual: f64,
    pub iterations: usize,
    pub final_step: f64,
}

fn radial_objective(model: &FieldModel, x: f64, y: f64, z: f64) -> Result<f64> {
    let e = model.field(Point3::new(x, y, z))?;
    Ok(e.ex.norm_sqr() + e.ey.norm_sqr())
}

/// ∇f for `f = |Ex|² + |Ey|²` from the field and its finite-difference Jacobian.
fn radial_gradient(model: &FieldModel, x: f64, y: f64, z: f64) -> Result<Vector2<f64>> {
    let h = NULL_FD_STEP;
    let e = model.field(Point3::new(x, y, z))?;
    let dx = (model.field(Point3::new(x + h, y, z))? - model.field(Point3::new(x - h, y, z))?) * (0.5 / h);
    let dy = (model.field(Point3::new(x, y + h, z))? - model.field(Point3::new(x, y - h, z))?) * (0.5 / h);
    let part = |d: &PhasorField3| 2.0 * (e.ex.conj() * d.ex + e.ey.conj() * d.ey).re;
    Ok(Vector2::new(part(&dx), part(&dy)))
}

fn radial_hessian(model: &FieldModel, x: f64, y: f64, z: f64) -> Result<Matrix2<f64>> {
    let h = NULL_FD_STEP;
    let f = |dx: f64, dy: f64| radial_objective(model, x + dx, y + dy, z);
    let f0 = f(0.0, 0.0)?;
    let fxx = (f(h, 0.0)? - 2.0 * f0 + f(-h, 0.0)?) / (h * h);
    let fyy = (f(0.0, h)? - 2.0 * f0 + f(0.0, -h)?) / (h * h);
    let fxy = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
    Ok(Matrix2::new(fxx, fxy, fxy, fyy))
}

fn is_positive_definite(m: &Matrix2<f64>) -> bool {
    m[(0, 0)] > 0.0 && m.determinant() > 0.0
}

/// Minimise `|Ex|² + |Ey|²` over the x-y plane at fixed `z` with damped
/// Newton steps from `guess = (x, y)`.
pub fn find_radial_null_in(model: &FieldModel, z: f64, guess: (f64, f64)) -> Result<NullResult> {
    if !(guess.0 > 0.0) {
        return Err(Error::InvalidArgument(format!("null guess must have x > 0, got {:e}", guess.0)));
    }
    let (mut x, mut y) = guess;
    let mut f = radial_objective(model, x, y, z)?;
    let g0 = radial_gradient(model, x, y, z)?.norm();
    let mut last_step = f64::INFINITY;

    for iter in 1..=NULL_MAX_ITER {
        let g = radial_gradient(model, x, y, z)?;
        if g0 == 0.0 || g.norm() <= NULL_GRAD_RTOL * g0 {
            return finish(model, x, y, z, iter, 0.0);
        }
        let h = radial_hessian(model, x, y, z)?;
        let mut step = match is_positive_definite(&h).then(|| h.lu().solve(&(-g))).flatten() {
            Some(s) => s,
            // far from the minimum: steepest descent scaled to a few microns
            None => -g * (2.0 * MICRON / g.norm()),
        };
        let mut accepted = false;
        for _ in 0..60 {
            let (xn, yn) = (x + step[0], y + step[1]);
            if xn > 0.0 {
                let fn_ = radial_objective(model, xn, yn, z)?;
                if fn_ <= f {
                    x = xn;
                    y = yn;
                    f = fn_;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        last_step = if accepted { step.norm() } else { 0.0 };
        if last_step < NULL_STEP_TOL {
            return finish(model, x, y, z, iter, last_step);
        }
    }
    Err(Error::NoConvergence {
        what: format!("radial null search at z = {z:e} m (last step {last_step:e} m)"),
        iterations: NULL_MAX_ITER,
    })
}

fn finish(model: &FieldModel, x: f64, y: f64, z: f64, iterations: usize, final_step: f64) -> Result<NullResult> {
    let h = radial_hessian(model, x, y, z)?;
    let eig = SymmetricEigen::new(h);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotTrapping(format!(
            "radial field has no minimum near ({x:e}, {y:e}); guess outside the trapping region"
        )));
    }
    let residual = model.field(Point3::new(x, y, z))?.radial();
    Ok(NullResult { position: Point3::new(x, y, z), residual, iterations, final_step })
}

/// Radial null of `layout` under its RF drives, in the plane at `z`.
pub fn find_radial_null(layout: &TrapLayout, drive: &Drive, z: f64, guess: (f64, f64)) -> Result<NullResult> {
    let model = FieldModel::new(layout, drive, DriveKind::Rf)?;
    find_radial_null_in(&model, z, guess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub null: NullResult,
    pub reference: NullResult,
}

/// Null shift of `layout` relative to `base` under identical drives.
/// Positive values point toward +x / +y.
pub fn displacement_from(
    layout: &TrapLayout,
    base: &TrapLayout,
    drive: &Drive,
    z: f64,
    guess: (f64, f64),
) -> Result<Displacement> {
    let reference = find_radial_null(base, drive, z, guess)?;
    let seed = (reference.position.x, reference.position.y);
    let null = find_radial_null(layout, drive, z, seed)?;
    Ok(Displacement {
        dx: null.position.x - reference.position.x,
        dy: null.position.y - reference.position.y,
        null,
        reference,
    })
}

/// Null shift relative to the reference trap.
pub fn displacement(layout: &TrapLayout, drive: &Drive, z: f64) -> Result<Displacement> {
    displacement_from(layout, &build_reference_layout(), drive, z, REFERENCE_GUESS)
}

/// Short content hash identifying a layout in result metadata.
pub fn layout_hash(layout: &TrapLayout) -> String {
    let bytes = serde_json::to_vec(layout).expect("layout serialises");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

/// Field samples along the line `(height, 0, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxialScan {
    pub z: Vec<f64>,
    pub fields: Vec<PhasorField3>,
    pub height: f64,
    pub layout_hash: String,
    pub drive: Drive,
}

impl AxialScan {
    pub fn pitch(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    pub fn component(&self, c: Component) -> Vec<Complex64> {
        self.fields.iter().map(|f| f.components()[c.index()]).collect()
    }
}

/// Sample the RF field along the trap axis at `height`.
pub fn axial_scan(
    layout: &TrapLayout,
    drive: &Drive,
    z_range: (f64, f64),
    n: usize,
    height: f64,
) -> Result<AxialScan> {
    let model = FieldModel::new(layout, drive, DriveKind::Rf)?;
    axial_scan_in(&model, z_range, n, height).map(|(z, fields)| AxialScan {
        z,
        fields,
        height,
        layout_hash: layout_hash(layout),
        drive: drive.clone(),
    })
}

pub fn axial_scan_in(
    model: &FieldModel,
    z_range: (f64, f64),
    n: usize,
    height: f64,
) -> Result<(Vec<f64>, Vec<PhasorField3>)> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("axial scan needs at least 3 samples, got {n}")));
    }
    if !(z_range.1 > z_range.0) {
        return Err(Error::InvalidArgument("axial scan range must be increasing".into()));
    }
    let pitch = (z_range.1 - z_range.0) / (n - 1) as f64;
    let z: Vec<f64> = (0..n).map(|i| z_range.0 + i as f64 * pitch).collect();
    let fields = z.par_iter().map(|&zi| model.field(Point3::new(height, 0.0, zi))).collect::<Result<Vec<_>>>()?;
    Ok((z, fields))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::X, Component::Y, Component::Z];

    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
            Component::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        }
    }
}

/// Catmull-Rom interpolant over uniformly spaced samples; its slope at a
/// node is the central difference there.
struct Interpolant<'a> {
    z0: f64,
    h: f64,
    v: &'a [f64],
}

impl<'a> Interpolant<'a> {
    fn slope_at_node(&self, k: usize) -> f64 {
        let n = self.v.len();
        if k == 0 {
            (self.v[1] - self.v[0]) / self.h
        } else if k == n - 1 {
            (self.v[n - 1] - self.v[n - 2]) / self.h
        } else {
            (self.v[k + 1] - self.v[k - 1]) / (2.0 * self.h)
        }
    }

    fn locate(&self, z: f64) -> (usize, f64) {
        let n = self.v.len();
        let s = ((z - self.z0) / self.h).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        (k, s - k as f64)
    }

    fn value(&self, z: f64) -> f64 {
        let (k, t) = self.locate(z);
        let (p0, p1) = (self.v[k], self.v[k + 1]);
        let (m0, m1) = (self.slope_at_node(k) * self.h, self.slope_at_node(k + 1) * self.h);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }

    fn derivative(&self, z: f64) -> f64 {
        let (k, t) = self.locate(z);
        let (p0, p1) = (self.v[k], self.v[k + 1]);
        let (m0, m1) = (self.slope_at_node(k) * self.h, self.slope_at_node(k + 1) * self.h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * p0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * p1 + (3.0 * t2 - 2.0 * t) * m1)
            / self.h
    }

    /// Root of `value - level` in `[a, b]`. When rounding leaves the interval
    /// unbracketed the closer endpoint is returned.
    fn bisect(&self, mut a: f64, mut b: f64, level: f64) -> f64 {
        let fa = self.value(a) - level;
        let fb = self.value(b) - level;
        if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
            return if fa.abs() <= fb.abs() { a } else { b };
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (self.value(m) - level).signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        0.5 * (a + b)
    }
}

/// Signed projection of a component onto the phase of its strongest sample.
/// For in-phase drives this is just the real field.
pub fn signed_component(scan: &AxialScan, c: Component) -> Vec<f64> {
    let vals = scan.component(c);
    let reference = vals.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap_or_default();
    let rot = if reference.norm() > 0.0 { reference.conj() / reference.norm() } else { Complex64::new(1.0, 0.0) };
    vals.iter().map(|v| (v * rot).re).collect()
}

/// Interpolated amplitude `|E_c|` at position `z`.
pub fn amplitude_at(scan: &AxialScan, c: Component, z: f64) -> f64 {
    let amp: Vec<f64> = scan.component(c).iter().map(|v| v.norm()).collect();
    Interpolant { z0: scan.z[0], h: scan.pitch(), v: &amp }.value(z)
}

/// Slope of the signed component at `z` (V/m²).
pub fn gradient_at(scan: &AxialScan, c: Component, z: f64) -> f64 {
    let s = signed_component(scan, c);
    Interpolant { z0: scan.z[0], h: scan.pitch(), v: &s }.derivative(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub component: Component,
    /// |E| at z = 0, V/m.
    pub amplitude_at_zero: f64,
    pub peak_amplitude: f64,
    pub peak_position: f64,
    /// Half-maximum points around the peak.
    pub half_max: (f64, f64),
    /// Mean |d|E|/dz| at the two half-maximum points, V/m².
    pub fwhm_gradient: f64,
    /// d E/dz of the signed component at z = 0, V/m².
    pub dispersive_gradient: f64,
}

/// Peak amplitude, half-maximum slopes and zero-crossing slope of one
/// component of an axial scan.
pub fn peak_metrics(scan: &AxialScan, c: Component) -> Result<PeakMetrics> {
    let n = scan.z.len();
    if n < 3 {
        return Err(Error::Peak("scan too short".into()));
    }
    let amp: Vec<f64> = scan.component(c).iter().map(|v| v.norm()).collect();
    let h = scan.pitch();
    let interp = Interpolant { z0: scan.z[0], h, v: &amp };

    let (k, &top) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let scale = scan.fields.iter().map(|f| f.norm()).fold(0.0, f64::max);
    if !(top > PEAK_NOISE_FLOOR * scale) || k == 0 || k == n - 1 {
        return Err(Error::Peak(format!("no peak in |E{}| inside the scan", c.name())));
    }
    let (a, b, cc) = (amp[k - 1], amp[k], amp[k + 1]);
    let denom = a - 2.0 * b + cc;
    let offset = if denom < 0.0 { (0.5 * (a - cc) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let peak_position = scan.z[k] + offset * h;
    let peak_amplitude = b - 0.25 * (a - cc) * offset;

    let half = 0.5 * peak_amplitude;
    let left = (0..k).rev().find(|&j| amp[j] < half);
    let right = (k + 1..n).find(|&j| amp[j] < half);
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::Peak(format!("half maximum of |E{}| not bracketed by the scan", c.name())));
    };
    if r - l - 1 < MIN_SAMPLES_IN_FWHM {
        return Err(Error::Peak(format!(
            "only {} samples inside the FWHM of |E{}|; refine the scan",
            r - l - 1,
            c.name()
        )));
    }
    let zl = interp.bisect(scan.z[l], scan.z[l + 1], half);
    let zr = interp.bisect(scan.z[r - 1], scan.z[r], half);
    let fwhm_gradient = 0.5 * (interp.derivative(zl).abs() + interp.derivative(zr).abs());

    Ok(PeakMetrics {
        component: c,
        amplitude_at_zero: amplitude_at(scan, c, 0.0),
        peak_amplitude,
        peak_position,
        half_max: (zl, zr),
        fwhm_gradient,
        dispersive_gradient: gradient_at(scan, c, 0.0),
    })
}
