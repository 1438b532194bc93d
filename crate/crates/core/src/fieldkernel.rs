//! Closed-form gapless-plane kernel and phasor superposition over a layout.
//!
//! A rectangular patch held at unit potential in an otherwise grounded plane
//! produces `φ = Ω / 2π` at a point above the plane, where `Ω` is the solid
//! angle the patch subtends. For a rectangle the solid angle is a signed sum
//! over its four corners of `atan(u v / (x R))`, with `(u, v)` the in-plane
//! offsets to the corner and `R` the distance to it. We evaluate each term as
//! `atan2(u v, x R)`, which keeps the correct branch and full precision down
//! to heights of a few nanometres above a patch interior (the guard band is
//! simply `x > 0`; below ~1e-12 m the corner terms saturate at ±π/2).

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{decompose, Coating, Drive, DriveKind, Rect, TrapLayout};
use crate::tco::TcoModel;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn check(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) || self.x <= 0.0 {
            return Err(Error::BelowPlane(self.x));
        }
        Ok(())
    }

    pub fn offset(&self, dx: f64, dy: f64, dz: f64) -> Point3 {
        Point3::new(self.x + dx, self.y + dy, self.z + dz)
    }
}

/// Complex field amplitudes, `E(t) = Re[E e^{iΩt}]`, in V/m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasorField3 {
    pub ex: Complex64,
    pub ey: Complex64,
    pub ez: Complex64,
}

impl PhasorField3 {
    pub fn from_real(e: [f64; 3]) -> Self {
        Self { ex: e[0].into(), ey: e[1].into(), ez: e[2].into() }
    }

    pub fn components(&self) -> [Complex64; 3] {
        [self.ex, self.ey, self.ez]
    }

    /// `|Ex|² + |Ey|² + |Ez|²`
    pub fn norm_sqr(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr() + self.ez.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Radial amplitude `sqrt(|Ex|² + |Ey|²)`.
    pub fn radial(&self) -> f64 {
        (self.ex.norm_sqr() + self.ey.norm_sqr()).sqrt()
    }
}

impl Add for PhasorField3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { ex: self.ex + o.ex, ey: self.ey + o.ey, ez: self.ez + o.ez }
    }
}

impl AddAssign for PhasorField3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for PhasorField3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { ex: self.ex - o.ex, ey: self.ey - o.ey, ez: self.ez - o.ez }
    }
}

impl Mul<Complex64> for PhasorField3 {
    type Output = Self;
    fn mul(self, k: Complex64) -> Self {
        Self { ex: self.ex * k, ey: self.ey * k, ez: self.ez * k }
    }
}

impl Mul<f64> for PhasorField3 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self { ex: self.ex * k, ey: self.ey * k, ez: self.ez * k }
    }
}

#[inline]
fn corners(patch: &Rect) -> [(f64, f64, f64); 4] {
    [
        (patch.y_max, patch.z_max, 1.0),
        (patch.y_max, patch.z_min, -1.0),
        (patch.y_min, patch.z_max, -1.0),
        (patch.y_min, patch.z_min, 1.0),
    ]
}

#[inline]
pub(crate) fn unit_potential(patch: &Rect, p: &Point3) -> f64 {
    let x = p.x;
    let mut omega = 0.0;
    for (yc, zc, s) in corners(patch) {
        let u = yc - p.y;
        let v = zc - p.z;
        let r = (x * x + u * u + v * v).sqrt();
        omega += s * (u * v).atan2(x * r);
    }
    omega / TWO_PI
}

#[inline]
pub(crate) fn unit_field(patch: &Rect, p: &Point3) -> [f64; 3] {
    let x = p.x;
    let x2 = x * x;
    let (mut ex, mut ey, mut ez) = (0.0, 0.0, 0.0);
    for (yc, zc, s) in corners(patch) {
        let u = yc - p.y;
        let v = zc - p.z;
        let (u2, v2) = (u * u, v * v);
        let r = (x2 + u2 + v2).sqrt();
        let xu = x2 + u2;
        let xv = x2 + v2;
        // E = -∇φ; d/dy = -d/du, d/dz = -d/dv
        ey += s * x * v / (xu * r);
        ez += s * x * u / (xv * r);
        ex += s * u * v * (u2 + v2 + 2.0 * x2) / (xu * xv * r);
    }
    [ex / TWO_PI, ey / TWO_PI, ez / TWO_PI]
}

/// Potential at `p` of `patch` held at 1 V with the rest of the plane at 0 V.
pub fn patch_potential(patch: &Rect, p: Point3) -> Result<f64> {
    p.check()?;
    Ok(unit_potential(patch, &p))
}

/// Field `-∇φ` at `p` of `patch` held at 1 V, in V/m per volt.
pub fn patch_field(patch: &Rect, p: Point3) -> Result<[f64; 3]> {
    p.check()?;
    Ok(unit_field(patch, &p))
}

/// A patch and the complex potential it is held at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenPatch {
    pub rect: Rect,
    pub volts: Complex64,
}

/// Layout and drives flattened into driven patches, ready for repeated
/// evaluation. Building one is the expensive part of [`layout_field`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldModel {
    patches: Vec<DrivenPatch>,
}

impl FieldModel {
    /// Collect every patch of the electrodes driven with `which`.
    ///
    /// Solid pieces carry the drive `V e^{iφ}`. Apertures are grounded
    /// openings unless coated, in which case the opening carries `H V e^{iφ}`
    /// with `H` from the coating model at the RF frequency (`H = 1` for DC).
    pub fn new(layout: &TrapLayout, drive: &Drive, which: DriveKind) -> Result<Self> {
        let mut patches = Vec::new();
        for (id, ex) in &drive.excitations {
            let electrode = layout.electrode(id)?;
            if ex.kind != which || ex.amplitude == 0.0 {
                continue;
            }
            let volts = Complex64::from_polar(ex.amplitude, ex.phase);
            let parts = decompose(electrode)?;
            patches.extend(parts.solids.iter().map(|&rect| DrivenPatch { rect, volts }));
            for (rect, ap) in parts.holes.iter().zip(&electrode.apertures) {
                if let Coating::Tco { .. } = ap.coating {
                    let h = match which {
                        DriveKind::Rf => TcoModel::for_aperture(ap, &layout.metadata())?.transfer(drive.rf_frequency)?,
                        DriveKind::Dc => Complex64::new(1.0, 0.0),
                    };
                    patches.push(DrivenPatch { rect: *rect, volts: volts * h });
                }
            }
        }
        Ok(Self { patches })
    }

    pub fn from_patches(patches: Vec<DrivenPatch>) -> Self {
        Self { patches }
    }

    pub fn patches(&self) -> &[DrivenPatch] {
        &self.patches
    }

    pub fn field(&self, p: Point3) -> Result<PhasorField3> {
        p.check()?;
        Ok(self.field_unchecked(&p))
    }

    pub(crate) fn field_unchecked(&self, p: &Point3) -> PhasorField3 {
        let mut out = PhasorField3::default();
        for dp in &self.patches {
            let [ex, ey, ez] = unit_field(&dp.rect, p);
            out.ex += dp.volts * ex;
            out.ey += dp.volts * ey;
            out.ez += dp.volts * ez;
        }
        out
    }

    pub fn potential(&self, p: Point3) -> Result<Complex64> {
        p.check()?;
        Ok(self.patches.iter().map(|dp| dp.volts * unit_potential(&dp.rect, &p)).sum())
    }
}

/// Phasor field of `layout` under the `which` subset of `drive` at `p`.
pub fn layout_field(layout: &TrapLayout, drive: &Drive, p: Point3, which: DriveKind) -> Result<PhasorField3> {
    p.check()?;
    FieldModel::new(layout, drive, which)?.field(p)
}
