//! Grating period, sensitivity and diffraction orders for the calibrated waveguides.
//!
//!     cargo run --example grating_design

use surftrap::constants::{MICRON, NANOMETER};
use surftrap::photonics::{aperture_for_beam, design_table, presets, BeamClearance};

fn main() -> surftrap::Result<()> {
    for (name, d) in [("Si3N4 760 nm", presets::SIN_SENSITIVITY), ("Al2O3 370 nm", presets::ALO_SENSITIVITY)] {
        println!("{name} (n_eff = {})", d.n_eff);
        println!("  theta   period   feature  sens      orders  error(5 nm)");
        let angles: Vec<f64> = (-8..=6).map(|k| 10.0 * k as f64).collect();
        for r in design_table(&d, &angles, 5.0 * NANOMETER, 100.0 * MICRON)? {
            println!(
                "  {:>5.0}  {:>7.1}  {:>7.1}  {:>6.3}  {:>8}  {:>7.2} deg",
                r.theta_deg,
                r.period_nm,
                r.feature_nm,
                r.sensitivity_deg_per_nm,
                format!("{:?}", r.orders),
                r.angle_error_deg
            );
        }
    }
    let b = BeamClearance {
        ion_height: 50.0 * MICRON,
        theta: 45f64.to_radians(),
        wavelength: 760.0 * NANOMETER,
        waist_at_ion: 2.0 * MICRON,
        clip_factor: 1.5,
        margin: 2.0 * MICRON,
    };
    println!("aperture for a 2 um waist at 45 deg, 50 um height: {:.1} um", aperture_for_beam(&b)? / MICRON);
    Ok(())
}
