//! Grating-coupler design relations.
//!
//! A grating of period `Λ` in a waveguide with effective index `n_eff`
//! diffracts order `m` at angle `θ` from the surface normal when
//! `n_eff - sin θ = m λ / Λ`. Positive angles are forward emission, negative
//! angles backward.

use serde::{Deserialize, Serialize};

use crate::constants::NANOMETER;
use crate::error::{Error, Result};

/// Calibrated effective-index presets.
///
/// Each value was obtained by inverting one reported design figure:
/// - Si₃N₄ at 760 nm: 1.4°/nm sensitivity at θ = -70° gives n_eff ≈ 1.58.
/// - Al₂O₃ at 370 nm: 2.7°/nm sensitivity at θ = -70° gives n_eff ≈ 1.50.
/// - Si₃N₄ order cutoff: second order appearing above θ₁ = 20° requires
///   `sin 20° = (n_eff - 1) / 2`, i.e. n_eff ≈ 1.684.
///
/// The two Si₃N₄ values disagree; each is only used for the figure it came from.
pub mod presets {
    use super::GratingDesign;
    use crate::constants::NANOMETER;

    pub const SIN_SENSITIVITY: GratingDesign = GratingDesign { n_eff: 1.58, wavelength: 760.0 * NANOMETER, order: 1 };
    pub const ALO_SENSITIVITY: GratingDesign = GratingDesign { n_eff: 1.50, wavelength: 370.0 * NANOMETER, order: 1 };
    pub const SIN_ORDER_CUTOFF: GratingDesign = GratingDesign { n_eff: 1.684, wavelength: 760.0 * NANOMETER, order: 1 };
}

/// Waveguide/wavelength/order triple shared by the design relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingDesign {
    pub n_eff: f64,
    pub wavelength: f64,
    pub order: u32,
}

impl GratingDesign {
    fn validate(&self) -> Result<()> {
        if !(self.n_eff > 1.0 && self.n_eff.is_finite()) {
            return Err(Error::InvalidArgument(format!("n_eff must exceed 1, got {}", self.n_eff)));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("diffraction order must be at least 1".into()));
        }
        Ok(())
    }
}

/// Period that sends order `m` to angle `theta` (radians).
pub fn grating_period(n_eff: f64, wavelength: f64, order: u32, theta: f64) -> Result<f64> {
    GratingDesign { n_eff, wavelength, order }.validate()?;
    let denom = n_eff - theta.sin();
    if denom <= 0.0 {
        return Err(Error::Grating(format!("n_eff = {n_eff} <= sin θ = {}", theta.sin())));
    }
    Ok(order as f64 * wavelength / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcoupling {
    Angle(f64),
    Evanescent,
}

impl Outcoupling {
    pub fn angle(self) -> Option<f64> {
        match self {
            Outcoupling::Angle(t) => Some(t),
            Outcoupling::Evanescent => None,
        }
    }
}

/// Emission angle of order `m` for period `period`, or evanescent.
pub fn outcoupling_angle(n_eff: f64, wavelength: f64, order: u32, period: f64) -> Result<Outcoupling> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("grating period must be positive, got {period:e}")));
    }
    let s = n_eff - order as f64 * wavelength / period;
    Ok(if (-1.0..=1.0).contains(&s) { Outcoupling::Angle(s.asin()) } else { Outcoupling::Evanescent })
}

/// Angle-to-period sensitivity `dθ/dΛ = m λ / (Λ² cos θ)` in rad/m.
pub fn sensitivity(n_eff: f64, wavelength: f64, order: u32, theta: f64) -> Result<f64> {
    let c = theta.cos();
    if theta.abs() >= std::f64::consts::FRAC_PI_2 || c == 0.0 {
        return Err(Error::Grating("sensitivity diverges at grazing emission".into()));
    }
    let period = grating_period(n_eff, wavelength, order, theta)?;
    Ok(order as f64 * wavelength / (period * period * c))
}

/// rad/m to °/nm.
pub fn rad_per_m_to_deg_per_nm(s: f64) -> f64 {
    s.to_degrees() * NANOMETER
}

/// Every order `m >= 1` that propagates for the given period.
pub fn propagating_orders(n_eff: f64, wavelength: f64, period: f64) -> Vec<(u32, f64)> {
    if !(period > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut m = 1u32;
    loop {
        let s = n_eff - m as f64 * wavelength / period;
        if s < -1.0 {
            break;
        }
        if s <= 1.0 {
            out.push((m, s.asin()));
        }
        m += 1;
    }
    out
}

/// Inputs to [`aperture_for_beam`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamClearance {
    pub ion_height: f64,
    pub theta: f64,
    pub wavelength: f64,
    /// Gaussian 1/e² radius at the ion (the waist).
    pub waist_at_ion: f64,
    /// Aperture half-width in units of the local beam radius.
    pub clip_factor: f64,
    pub margin: f64,
}

/// Square aperture width that passes the beam for an ion at `ion_height`.
///
/// The beam is back-propagated from its waist at the ion over the slant path
/// `h / cos θ`; the footprint on the surface is stretched by `1 / cos θ`.
pub fn aperture_for_beam(b: &BeamClearance) -> Result<f64> {
    if b.theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InvalidArgument("beam angle must be below 90°".into()));
    }
    let c = b.theta.cos();
    let path = b.ion_height / c;
    let rayleigh = std::f64::consts::PI * b.waist_at_ion * b.waist_at_ion / b.wavelength;
    let w_surface = b.waist_at_ion * (1.0 + (path / rayleigh).powi(2)).sqrt();
    Ok(2.0 * b.clip_factor * w_surface / c + b.margin)
}

/// One row of the grating design table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub theta_deg: f64,
    pub period_nm: f64,
    pub feature_nm: f64,
    pub sensitivity_deg_per_nm: f64,
    pub orders: Vec<u32>,
    /// Angle error for the given period tolerance, degrees.
    pub angle_error_deg: f64,
    /// Lateral beam offset at the ion caused by the angle error, µm.
    pub beam_offset_um: f64,
}

/// Design table over `angles_deg` for a period tolerance and ion height.
pub fn design_table(design: &GratingDesign, angles_deg: &[f64], period_tol: f64, ion_height: f64) -> Result<Vec<DesignRow>> {
    design.validate()?;
    angles_deg
        .iter()
        .map(|&deg| {
            let theta = deg.to_radians();
            let period = grating_period(design.n_eff, design.wavelength, design.order, theta)?;
            let sens = sensitivity(design.n_eff, design.wavelength, design.order, theta)?;
            let orders = propagating_orders(design.n_eff, design.wavelength, period).into_iter().map(|(m, _)| m).collect();
            // the period error moves the angle along the exact relation, not the linearisation
            let shifted = match outcoupling_angle(design.n_eff, design.wavelength, design.order, period + period_tol)? {
                Outcoupling::Angle(t) => t,
                Outcoupling::Evanescent => f64::NAN,
            };
            let dtheta = shifted - theta;
            Ok(DesignRow {
                theta_deg: deg,
                period_nm: period / NANOMETER,
                feature_nm: 0.5 * period / NANOMETER,
                sensitivity_deg_per_nm: rad_per_m_to_deg_per_nm(sens),
                orders,
                angle_error_deg: dtheta.to_degrees(),
                beam_offset_um: ion_height * ((theta + dtheta).tan() - theta.tan()) / crate::constants::MICRON,
            })
        })
        .collect()
}
