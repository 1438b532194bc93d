//! Null displacement and Ey peak against aperture width, with micromotion.
//!
//!     cargo run --release --example aperture_size

use surftrap::analysis::{axial_scan, displacement, peak_metrics, Component};
use surftrap::config::LayoutConfig;
use surftrap::constants::{MICRON, NANOMETER};
use surftrap::rfdynamics::micromotion;
use surftrap::Aperture;

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    println!("w_a_um,dx0_nm,dy0_nm,ey_peak_v_per_m,micromotion_nm");
    for w in (10..=100).step_by(10) {
        let l = cfg.layout.with_aperture(Aperture::new(126.8 * MICRON, 0.0, w as f64 * MICRON))?;
        let d = displacement(&l, &cfg.drive, 0.0)?;
        let scan = axial_scan(&l, &cfg.drive, (-1000.0 * MICRON, 1000.0 * MICRON), 2001, d.reference.position.x)?;
        let ey = peak_metrics(&scan, Component::Y)?.peak_amplitude;
        // an ion held at the old target height sees the peak field
        let mm = micromotion(ey, &cfg.ion, cfg.drive.rf_frequency);
        println!("{w},{:.2},{:.2},{ey:.1},{:.2}", d.dx / NANOMETER, d.dy / NANOMETER, mm.amplitude / NANOMETER);
    }
    Ok(())
}
