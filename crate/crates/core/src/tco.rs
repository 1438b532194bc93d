//! Lumped model of a transparent conductive coating across an aperture.
//!
//! The film is fed from the surrounding electrode through its sheet
//! resistance `R = α / (σ t)` and loaded by the capacitance of the patch to
//! the ground plane underneath, `C = ε0 εr w² / d`. The patch potential
//! follows the electrode through the RC divider
//!
//! ```text
//! H(Ω) = 1 / (1 + i Ω R C)
//! ```
//!
//! so a good conductor tracks the electrode (`H -> 1`) and a poor one leaves
//! the opening at ground (`H -> 0`). Only the opening sees the phase lag; the
//! gold electrode keeps its nominal drive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{MICRON, NANOMETER, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::geometry::{Aperture, Coating, LayoutMetadata};

/// Film thickness used throughout the coating study.
pub const DEFAULT_THICKNESS: f64 = 50.0 * NANOMETER;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcoModel {
    /// S/m
    pub conductivity: f64,
    pub thickness: f64,
    /// Side of the coated square opening.
    pub width: f64,
    /// Dielectric gap between the film and the ground plane.
    pub ground_depth: f64,
    pub permittivity: f64,
    /// Multiplies the square sheet resistance; 1 for a square patch.
    pub geometry_factor: f64,
}

impl TcoModel {
    pub fn new(conductivity: f64, width: f64) -> Self {
        Self {
            conductivity,
            thickness: DEFAULT_THICKNESS,
            width,
            ground_depth: 3.0 * MICRON,
            permittivity: 3.9,
            geometry_factor: 1.0,
        }
    }

    /// Model for a coated aperture, taking the stack-up from the layout.
    pub fn for_aperture(aperture: &Aperture, meta: &LayoutMetadata) -> Result<Self> {
        match aperture.coating {
            Coating::Tco { conductivity, thickness } => {
                let m = Self {
                    conductivity,
                    thickness,
                    width: aperture.width,
                    ground_depth: meta.ground_depth,
                    permittivity: meta.cladding_permittivity,
                    geometry_factor: 1.0,
                };
                m.validate()?;
                Ok(m)
            }
            Coating::None => Err(Error::InvalidArgument("aperture has no coating".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("conductivity", self.conductivity),
            ("thickness", self.thickness),
            ("width", self.width),
            ("ground depth", self.ground_depth),
            ("permittivity", self.permittivity),
            ("geometry factor", self.geometry_factor),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("coating {name} must be positive, got {v:e}")));
            }
        }
        Ok(())
    }

    /// Series sheet resistance, Ω.
    pub fn resistance(&self) -> f64 {
        self.geometry_factor / (self.conductivity * self.thickness)
    }

    /// Patch-to-ground capacitance, F.
    pub fn capacitance(&self) -> f64 {
        VACUUM_PERMITTIVITY * self.permittivity * self.width * self.width / self.ground_depth
    }

    /// Electrode-to-patch transfer `H(Ω)`.
    pub fn transfer(&self, omega: f64) -> Result<Complex64> {
        self.validate()?;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("angular frequency must be positive, got {omega:e}")));
        }
        let wrc = omega * self.resistance() * self.capacitance();
        Ok(Complex64::new(1.0, 0.0) / Complex64::new(1.0, wrc))
    }

    /// Conductivity at which `Ω R C = 1`, i.e. `|H| = 1/√2`.
    pub fn crossover_conductivity(&self, omega: f64) -> f64 {
        self.geometry_factor * omega * self.capacitance() / self.thickness
    }
}

/// Drive seen by the coated opening for an electrode drive `V e^{iφ}`.
pub fn coated_drive(electrode_drive: Complex64, model: &TcoModel, omega: f64) -> Result<Complex64> {
    Ok(electrode_drive * model.transfer(omega)?)
}
