//! A 30 µm aperture in the RF rail, the centre DC electrode and an outer DC segment.
//!
//!     cargo run --release --example single_aperture

use surftrap::analysis::{axial_scan, displacement, find_radial_null, peak_metrics, Component};
use surftrap::config::LayoutConfig;
use surftrap::constants::{MICRON, NANOMETER};
use surftrap::geometry::aperture_angle_deg;
use surftrap::Aperture;

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    let height = find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?.position.x;
    for (label, p_y) in [("RF rail", 126.8), ("centre DC", 24.7), ("outer DC", 257.0)] {
        let layout = cfg.layout.with_aperture(Aperture::new(p_y * MICRON, 0.0, 30.0 * MICRON))?;
        let d = displacement(&layout, &cfg.drive, 0.0)?;
        println!(
            "{label:<10} p_y = {p_y:>5} um  angle {:>4.1} deg  dx0 = {:>8.2} nm  dy0 = {:>8.2} nm",
            aperture_angle_deg(p_y * MICRON, height),
            d.dx / NANOMETER,
            d.dy / NANOMETER
        );
        let scan = axial_scan(&layout, &cfg.drive, (-1000.0 * MICRON, 1000.0 * MICRON), 2001, height)?;
        match peak_metrics(&scan, Component::Y) {
            Ok(p) => println!(
                "           Ey peak {:.1} V/m at z = {:.2} um, FWHM slope {:.2} V/mm^2",
                p.peak_amplitude,
                p.peak_position / MICRON,
                p.fwhm_gradient / 1e6
            ),
            Err(e) => println!("           Ey: {e}"),
        }
    }
    Ok(())
}
