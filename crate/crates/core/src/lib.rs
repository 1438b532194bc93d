//! RF field distortion in surface-electrode ion traps with optical apertures.
//!
//! The electrode plane is modelled in the gapless-plane approximation: every
//! electrode is a set of rectangular patches held at a prescribed (complex)
//! potential and everything else in the plane is grounded. Patch potentials
//! and fields have closed forms, so every analysis here (RF null search,
//! axial scans, secular frequencies, trap depth) is built on exact kernel
//! evaluations plus small finite-difference stencils.
//!
//! Module map:
//!
//! - [`geometry`]: trap layout, apertures, drives, the reference trap.
//! - [`fieldkernel`]: solid-angle patch kernel and phasor superposition.
//! - [`rfdynamics`]: pseudopotential, secular frequencies, depth, micromotion.
//! - [`analysis`]: radial null finding, displacement, axial scans, peak metrics.
//! - [`photonics`]: grating-coupler period/angle relations.
//! - [`tco`]: lumped transparent-conductor coating model.
//! - [`config`] and [`runner`]: file formats, presets and the sweep engine.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod error;
pub mod fieldkernel;
pub mod geometry;
pub mod photonics;
pub mod rfdynamics;
pub mod runner;
pub mod tco;

pub use error::{Error, Result};
pub use fieldkernel::{FieldModel, PhasorField3, Point3};
pub use geometry::{Aperture, Coating, Drive, DriveKind, Electrode, ElectrodeKind, Rect, TrapLayout};
pub use rfdynamics::IonSpecies;
