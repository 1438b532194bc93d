//! Physical constants (CODATA 2018) and unit helpers.

use std::f64::consts::PI;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const ELECTRON_MASS_U: f64 = 5.485_799_090_65e-4;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Conductivity of gold used for the "ideal" coating limit, S/m.
pub const GOLD_CONDUCTIVITY: f64 = 4.5e7;

pub const MICRON: f64 = 1e-6;
pub const NANOMETER: f64 = 1e-9;

/// Angular frequency for a frequency given in MHz.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn joule_to_ev(energy: f64) -> f64 {
    energy / ELEMENTARY_CHARGE
}
